//! Least-squares similarity alignment of faces to a five-point template.

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{pixel_to_ndc, FlowField, Image, Vec2};
use crate::io::landmarks::{read_landmarks, FiveLandmarks};
use crate::sampler;

/// Output resolution of aligned faces.
pub const DEFAULT_ALIGNED_SIZE: usize = 256;
pub const MIN_ALIGNED_SIZE: usize = 16;
/// Environment variable naming a template landmarks file.
pub const TEMPLATE_ENV: &str = "WARPKIT_TEMPLATE";

/// Default template, as fractions of the output side length (a widely used
/// five-point layout for 112-pixel crops, divided by 112).
pub const DEFAULT_TEMPLATE: [Vec2; 5] = [
    [38.2946 / 112.0, 51.6963 / 112.0],
    [73.5318 / 112.0, 51.5014 / 112.0],
    [56.0252 / 112.0, 71.7366 / 112.0],
    [41.5493 / 112.0, 92.3655 / 112.0],
    [70.7299 / 112.0, 92.2041 / 112.0],
];

/// `x ↦ scale · R(rotation) · x + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: f64,
    pub translation: Vec2,
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: 0.0,
            translation: [0.0; 2],
        }
    }

    pub fn apply(&self, p: Vec2) -> Vec2 {
        let (s, c) = self.rotation.sin_cos();
        [
            self.scale * (c * p[0] - s * p[1]) + self.translation[0],
            self.scale * (s * p[0] + c * p[1]) + self.translation[1],
        ]
    }

    pub fn inverse(&self) -> Self {
        let inv = Self {
            scale: 1.0 / self.scale,
            rotation: -self.rotation,
            translation: [0.0; 2],
        };
        let t = inv.apply(self.translation);
        Self {
            translation: [-t[0], -t[1]],
            ..inv
        }
    }
}

/// Closed-form least-squares similarity taking `source[i]` towards `target[i]`.
pub fn estimate_similarity_points(source: &[Vec2], target: &[Vec2]) -> Result<SimilarityTransform> {
    if source.len() != target.len() || source.is_empty() {
        return Err(Error::Shape(format!(
            "{} source points vs {} target points",
            source.len(),
            target.len()
        )));
    }
    let n = source.len() as f64;
    let centroid = |pts: &[Vec2]| {
        let s = pts.iter().fold([0.0; 2], |a, p| [a[0] + p[0], a[1] + p[1]]);
        [s[0] / n, s[1] / n]
    };
    let (cs, ct) = (centroid(source), centroid(target));
    let (mut dot, mut cross, mut spread) = (0.0, 0.0, 0.0);
    for (s, t) in source.iter().zip(target) {
        let (sx, sy) = (s[0] - cs[0], s[1] - cs[1]);
        let (tx, ty) = (t[0] - ct[0], t[1] - ct[1]);
        dot += sx * tx + sy * ty;
        cross += sx * ty - sy * tx;
        spread += sx * sx + sy * sy;
    }
    if !(spread > 1e-18) {
        return Err(Error::Degenerate("source points coincide".into()));
    }
    let scale = dot.hypot(cross) / spread;
    if !(scale > 0.0) {
        return Err(Error::Degenerate("target points coincide".into()));
    }
    let mut t = SimilarityTransform {
        scale,
        rotation: cross.atan2(dot),
        translation: [0.0; 2],
    };
    let moved = t.apply(cs);
    t.translation = [ct[0] - moved[0], ct[1] - moved[1]];
    Ok(t)
}

pub fn estimate_similarity(source: &FiveLandmarks, template: &FiveLandmarks) -> Result<SimilarityTransform> {
    estimate_similarity_points(&source.points(), &template.points())
}

/// Template landmarks in pixels of an `out_size`-square output.
pub fn template_pixels(template_unit: &[Vec2; 5], out_size: usize) -> Result<FiveLandmarks> {
    FiveLandmarks::from_points(template_unit.map(|p| [p[0] * out_size as f64, p[1] * out_size as f64]))
}

/// The template named by `WARPKIT_TEMPLATE`, or the built-in default.
///
/// The file uses the landmarks schema with coordinates in pixels of a
/// 256×256 crop; it is rescaled for other output sizes.
pub fn template_from_env() -> Result<[Vec2; 5]> {
    match std::env::var_os(TEMPLATE_ENV) {
        Some(path) => {
            let side = DEFAULT_ALIGNED_SIZE as f64;
            Ok(read_landmarks(Path::new(&path))?
                .points()
                .map(|p| [p[0] / side, p[1] / side]))
        }
        None => Ok(DEFAULT_TEMPLATE),
    }
}

/// Resamples `image` so that `landmarks` land on the template scaled to `out_size`.
pub fn align_face_with_template(
    image: &Image,
    landmarks: &FiveLandmarks,
    template_unit: &[Vec2; 5],
    out_size: usize,
) -> Result<(Image, SimilarityTransform)> {
    if out_size < MIN_ALIGNED_SIZE {
        return Err(Error::Parameter(format!(
            "aligned size must be at least {MIN_ALIGNED_SIZE}, got {out_size}"
        )));
    }
    let template = template_pixels(template_unit, out_size)?;
    let forward = estimate_similarity(landmarks, &template)?;
    let back = forward.inverse();
    let (h, w) = (image.height(), image.width());
    let flow = FlowField::from_fn(out_size, out_size, |row, col, _| {
        let src = back.apply([col as f64, row as f64]);
        [pixel_to_ndc(src[0], w), pixel_to_ndc(src[1], h)]
    });
    Ok((sampler::resample(image, &flow), forward))
}

/// Aligns with the default template.
pub fn align_face(image: &Image, landmarks: &FiveLandmarks, out_size: usize) -> Result<Image> {
    align_face_with_template(image, landmarks, &DEFAULT_TEMPLATE, out_size).map(|(img, _)| img)
}
