//! Alternative transformation methods sharing the bilinear sampler.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{FlowField, Image, Vec2};
use crate::sampler;
use crate::tps::{self, ControlPointSet};

/// Which transformation family drives a warp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Tps,
    Projective,
    Dense,
    Landmark,
}

/// Homography `[[h0 h1 h2] [h3 h4 h5] [h6 h7 1]]` taking source NDC to destination NDC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectiveParams {
    h: [f64; 8],
}

const MIN_DETERMINANT: f64 = 1e-12;

impl ProjectiveParams {
    pub fn new(h: [f64; 8]) -> Result<Self> {
        if !h.iter().all(|v| v.is_finite()) {
            return Err(Error::Parameter("homography entries must be finite".into()));
        }
        let params = Self { h };
        let det = params.determinant();
        if !(det.abs() > MIN_DETERMINANT) {
            return Err(Error::Parameter(format!(
                "homography is not invertible (det = {det:e})"
            )));
        }
        Ok(params)
    }

    pub fn identity() -> Self {
        Self {
            h: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        }
    }

    /// Pure translation by `t` in NDC.
    pub fn translation(t: Vec2) -> Self {
        Self {
            h: [1.0, 0.0, t[0], 0.0, 1.0, t[1], 0.0, 0.0],
        }
    }

    pub fn params(&self) -> [f64; 8] {
        self.h
    }

    pub fn matrix(&self) -> [[f64; 3]; 3] {
        let h = self.h;
        [[h[0], h[1], h[2]], [h[3], h[4], h[5]], [h[6], h[7], 1.0]]
    }

    pub fn determinant(&self) -> f64 {
        let m = self.matrix();
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Adjugate of the matrix; proportional to the inverse.
    fn adjugate(&self) -> [[f64; 3]; 3] {
        let m = self.matrix();
        let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
        [
            [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
            [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
            [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
        ]
    }

    /// Maps a destination point back to its source, `None` at the line at infinity.
    pub fn inverse_map(&self, q: Vec2) -> Option<Vec2> {
        let a = self.adjugate();
        let x = a[0][0] * q[0] + a[0][1] * q[1] + a[0][2];
        let y = a[1][0] * q[0] + a[1][1] * q[1] + a[1][2];
        let w = a[2][0] * q[0] + a[2][1] * q[1] + a[2][2];
        let (x, y) = (x / w, y / w);
        (w.abs() > MIN_DETERMINANT && x.is_finite() && y.is_finite()).then_some([x, y])
    }

    pub fn flow(&self, height: usize, width: usize) -> Result<FlowField> {
        let mut data = Vec::with_capacity(height * width);
        for entry in FlowField::identity(height, width).data() {
            data.push(self.inverse_map(*entry).ok_or_else(|| {
                Error::Parameter(format!("homography sends pixel at {entry:?} to infinity"))
            })?);
        }
        FlowField::new(height, width, data)
    }
}

/// Warps by a homography applied in NDC.
pub fn projective_warp(image: &Image, params: &ProjectiveParams) -> Result<Image> {
    if *params == ProjectiveParams::identity() {
        return Ok(image.clone());
    }
    sampler::bilinear_sample(image, &params.flow(image.height(), image.width())?)
}

/// Coarse grid of NDC source offsets, upsampled bilinearly to the image size.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseDeformationGrid {
    height: usize,
    width: usize,
    offsets: Vec<Vec2>,
}

/// Default coarse grid resolution.
pub const DEFAULT_GRID_SIZE: usize = 16;

impl CoarseDeformationGrid {
    pub fn new(height: usize, width: usize, offsets: Vec<Vec2>) -> Result<Self> {
        if height < 2 || width < 2 {
            return Err(Error::Shape(format!(
                "deformation grid must be at least 2x2, got {height}x{width}"
            )));
        }
        if height.checked_mul(width) != Some(offsets.len()) {
            return Err(Error::Shape(format!(
                "expected {} offsets for {height}x{width}, got {}",
                height.saturating_mul(width),
                offsets.len()
            )));
        }
        if !offsets.iter().all(|o| o[0].is_finite() && o[1].is_finite()) {
            return Err(Error::Domain("deformation offsets must be finite".into()));
        }
        Ok(Self {
            height,
            width,
            offsets,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![[0.0; 2]; height * width])
    }

    /// Samples `f(center) - center` at the grid's own pixel centers.
    pub fn from_flow_fn(height: usize, width: usize, mut f: impl FnMut(Vec2) -> Vec2) -> Result<Self> {
        let offsets = FlowField::identity(height, width)
            .data()
            .iter()
            .map(|&q| {
                let s = f(q);
                [s[0] - q[0], s[1] - q[1]]
            })
            .collect();
        Self::new(height, width, offsets)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn offsets(&self) -> &[Vec2] {
        &self.offsets
    }

    pub fn is_zero(&self) -> bool {
        self.offsets.iter().all(|o| o[0] == 0.0 && o[1] == 0.0)
    }

    /// Bilinear upsampling of the offsets to a dense `height`×`width` grid.
    ///
    /// Grid nodes sit at the pixel centers of a `self.height`×`self.width`
    /// image spanning the same NDC square; outside the outermost nodes the
    /// offsets are held constant.
    pub fn upsample(&self, height: usize, width: usize) -> Vec<Vec2> {
        let as_image = Image::new(
            self.height,
            self.width,
            2,
            self.offsets.iter().flat_map(|o| [o[0], o[1]]).collect(),
        )
        .expect("grid invariants match image invariants");
        let up = sampler::resample(&as_image, &FlowField::identity(height, width));
        up.data().chunks_exact(2).map(|c| [c[0], c[1]]).collect()
    }

    pub fn flow(&self, height: usize, width: usize) -> FlowField {
        let offsets = self.upsample(height, width);
        let identity = FlowField::identity(height, width);
        let data = identity
            .data()
            .iter()
            .zip(offsets)
            .map(|(q, o)| [q[0] + o[0], q[1] + o[1]])
            .collect();
        FlowField::new(height, width, data).expect("finite offsets give a finite flow")
    }
}

/// Warps by a coarse offset grid; the zero grid is the identity.
pub fn dense_warp(image: &Image, grid: &CoarseDeformationGrid) -> Result<Image> {
    if grid.is_zero() {
        return Ok(image.clone());
    }
    sampler::bilinear_sample(image, &grid.flow(image.height(), image.width()))
}

/// Fixed anchor points (e.g. detector landmarks) in NDC.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    anchors: Vec<Vec2>,
}

impl LandmarkSet {
    pub fn new(anchors: Vec<Vec2>) -> Result<Self> {
        if !anchors.iter().all(|a| a[0].is_finite() && a[1].is_finite()) {
            return Err(Error::Domain("landmarks must be finite".into()));
        }
        if anchors.len() < 3 {
            return Err(Error::Parameter(format!(
                "need at least 3 landmarks, got {}",
                anchors.len()
            )));
        }
        tps::check_destinations(&anchors)?;
        Ok(Self { anchors })
    }

    pub fn anchors(&self) -> &[Vec2] {
        &self.anchors
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }
}

/// Spline warp with the anchors as fixed source points.
pub fn landmark_warp(
    image: &Image,
    anchors: &LandmarkSet,
    displacements: &[Vec2],
    alpha: f64,
    lambda: f64,
) -> Result<Image> {
    if displacements.len() != anchors.len() {
        return Err(Error::Shape(format!(
            "{} anchors but {} displacements",
            anchors.len(),
            displacements.len()
        )));
    }
    let control = ControlPointSet::new(anchors.anchors().to_vec(), displacements.to_vec())?;
    sampler::warp_image(image, &control, alpha, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn ramp(h: usize, w: usize) -> Image {
        Image::from_fn(h, w, 1, |r, c, _| (r * w + c) as f64 / (h * w) as f64)
    }

    #[test]
    fn identities_are_exact() {
        let img = synth::smooth_image(&mut synth::seeded_rng(4), 20, 24, 3, 2.0);
        assert_eq!(projective_warp(&img, &ProjectiveParams::identity()).unwrap(), img);
        assert_eq!(
            dense_warp(&img, &CoarseDeformationGrid::zeros(16, 16).unwrap()).unwrap(),
            img
        );
        let anchors = LandmarkSet::new(synth::grid_points(5)).unwrap();
        assert_eq!(landmark_warp(&img, &anchors, &[[0.0; 2]; 5], 1.5, 1e-6).unwrap(), img);
    }

    #[test]
    fn projective_translation_matches_constant_flow() {
        let img = ramp(10, 12);
        let t = [0.13, -0.07];
        let warped = projective_warp(&img, &ProjectiveParams::translation(t)).unwrap();
        let flow = FlowField::from_fn(10, 12, |_, _, q| [q[0] - t[0], q[1] - t[1]]);
        assert_eq!(warped, sampler::bilinear_sample(&img, &flow).unwrap());
    }

    #[test]
    fn constant_grid_matches_constant_flow() {
        let img = ramp(12, 12);
        let o = [0.1, 0.05];
        let grid = CoarseDeformationGrid::new(4, 4, vec![o; 16]).unwrap();
        let warped = dense_warp(&img, &grid).unwrap();
        let flow = FlowField::from_fn(12, 12, |_, _, q| [q[0] + o[0], q[1] + o[1]]);
        assert_eq!(warped, sampler::bilinear_sample(&img, &flow).unwrap());
    }

    #[test]
    fn parameter_validation() {
        assert!(ProjectiveParams::new([1.0, 2.0, 0.0, 2.0, 4.0, 0.0, 0.0, 0.0]).is_err());
        assert!(ProjectiveParams::new([f64::NAN; 8]).is_err());
        assert!(CoarseDeformationGrid::zeros(1, 16).is_err());
        assert!(CoarseDeformationGrid::new(2, 2, vec![[0.0; 2]; 3]).is_err());
        assert!(LandmarkSet::new(vec![[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]]).is_err());
        let anchors = LandmarkSet::new(synth::grid_points(4)).unwrap();
        assert!(matches!(
            landmark_warp(&ramp(4, 4), &anchors, &[[0.0; 2]; 3], 1.0, 0.0),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn homography_sending_pixels_to_infinity_is_rejected() {
        // the inverse has w = 1 - 2u, which vanishes on the pixel column u = 0.5 of a 2x2 image
        let h = ProjectiveParams::new([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 2.0, 0.0]).unwrap();
        assert!(h.inverse_map([0.3, 0.0]).is_some());
        assert!(h.inverse_map([0.5, 0.1]).is_none());
        assert!(matches!(projective_warp(&ramp(2, 2), &h), Err(Error::Parameter(_))));
        assert!(projective_warp(&ramp(4, 4), &h).is_ok());
    }
}
