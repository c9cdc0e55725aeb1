//! Seeded synthetic inputs: smooth images and control-point layouts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image::{Image, Vec2};
use crate::tps::ControlPointSet;

/// Deterministic generator used for every seeded routine in the crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Half-extent of the grid control points are laid out on.
pub const GRID_EXTENT: f64 = 0.8;

/// `k` points on a near-square grid over `[-0.8, 0.8]²`, filled row-major.
pub fn grid_points(k: usize) -> Vec<Vec2> {
    let cols = (k as f64).sqrt().ceil().max(1.0) as usize;
    let rows = k.div_ceil(cols);
    let coord = |i: usize, n: usize| {
        if n == 1 {
            0.0
        } else {
            GRID_EXTENT * (((2 * i) as f64 - (n - 1) as f64) / (n - 1) as f64)
        }
    };
    (0..k).map(|i| [coord(i % cols, cols), coord(i / cols, rows)]).collect()
}

/// Grid points jittered by up to `jitter` grid spacings, with displacements
/// drawn uniformly and rescaled so that `max |Δp| = magnitude` exactly.
pub fn random_control<R: Rng>(rng: &mut R, k: usize, magnitude: f64, jitter: f64) -> ControlPointSet {
    let cols = (k as f64).sqrt().ceil() as usize;
    let spacing = 2.0 * GRID_EXTENT / (cols.max(2) - 1) as f64;
    let points: Vec<Vec2> = grid_points(k)
        .into_iter()
        .map(|p| {
            [
                p[0] + jitter * spacing * rng.random_range(-1.0..=1.0),
                p[1] + jitter * spacing * rng.random_range(-1.0..=1.0),
            ]
        })
        .collect();
    let mut displacements: Vec<Vec2> = (0..k)
        .map(|_| [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)])
        .collect();
    let largest = displacements
        .iter()
        .flat_map(|d| d.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if largest > 0.0 { magnitude / largest } else { 0.0 };
    for d in &mut displacements {
        d[0] *= scale;
        d[1] *= scale;
    }
    ControlPointSet::new(points, displacements).expect("grid layout is a valid control set")
}

fn gaussian_taps(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / total).collect()
}

/// Separable Gaussian blur with clamp-to-edge borders.
pub fn gaussian_blur(image: &Image, sigma: f64) -> Image {
    if sigma <= 0.0 {
        return image.clone();
    }
    let taps = gaussian_taps(sigma);
    let radius = (taps.len() / 2) as i64;
    let (h, w, ch) = (image.height(), image.width(), image.channels());
    let clamp = |i: i64, n: usize| i.clamp(0, n as i64 - 1) as usize;
    let horizontal = Image::from_fn(h, w, ch, |r, c, k| {
        taps.iter()
            .enumerate()
            .map(|(t, weight)| weight * image.get(r, clamp(c as i64 + t as i64 - radius, w), k))
            .sum()
    });
    Image::from_fn(h, w, ch, |r, c, k| {
        taps.iter()
            .enumerate()
            .map(|(t, weight)| weight * horizontal.get(clamp(r as i64 + t as i64 - radius, h), c, k))
            .sum()
    })
}

/// Blurred uniform noise, stretched per channel to span `[0.05, 0.95]`.
pub fn smooth_image<R: Rng>(rng: &mut R, height: usize, width: usize, channels: usize, sigma: f64) -> Image {
    let noise = Image::from_fn(height, width, channels, |_, _, _| rng.random::<f64>());
    let mut blurred = gaussian_blur(&noise, sigma);
    for c in 0..channels {
        let values = blurred.data().iter().skip(c).step_by(channels);
        let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let span = if hi > lo { hi - lo } else { 1.0 };
        for v in blurred.data_mut().iter_mut().skip(c).step_by(channels) {
            *v = 0.05 + 0.9 * (*v - lo) / span;
        }
    }
    blurred
}
