//! Reverse-mode derivatives of [`warp_image`](crate::sampler::warp_image).
//!
//! The chain is image ← bilinear sampling ← flow ← spline parameters ←
//! (points, displacements). The spline parameters come out of a linear solve
//! whose matrix depends on the destinations, so the solve is differentiated
//! with the adjoint rule: one extra solve against the (symmetric) system
//! matrix, followed by the kernel-derivative terms for every matrix entry that
//! depends on a destination.
//!
//! Bilinear sampling is piecewise smooth. At a source location that lies
//! exactly on a sample row or column the stencil starting at that sample is
//! differentiated, and coordinates clamped at the border contribute nothing.

use nalgebra::DMatrix;
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::image::{ndc_to_pixel, FlowField, Image, Vec2};
use crate::sampler::{self, locate};
use crate::synth;
use crate::tps::{self, kernel_grad_factor, kernel_sq, ControlPointSet, FittedSpline};

/// Cotangents of a scalar `⟨upstream, warp(image, control)⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpCotangents {
    pub d_image: Image,
    pub d_points: Vec<Vec2>,
    pub d_displacements: Vec<Vec2>,
}

/// Forward state of one warp, reusable for a backward pass.
pub(crate) struct WarpTape {
    spline: FittedSpline,
    alpha: f64,
    flow: FlowField,
    pub output: Image,
}

impl WarpTape {
    /// Runs the warp without the zero-displacement shortcut.
    pub fn record(image: &Image, control: &ControlPointSet, alpha: f64, lambda: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::Domain(format!("alpha must be finite, got {alpha}")));
        }
        let spline = tps::fit_system(&control.scaled(alpha), lambda)?;
        let flow = sampler::build_flow(&spline.params, image.height(), image.width());
        let output = sampler::resample(image, &flow);
        Ok(Self {
            spline,
            alpha,
            flow,
            output,
        })
    }

    pub fn backward(&self, image: &Image, upstream: &[f64]) -> Result<WarpCotangents> {
        let (h, w, ch) = (image.height(), image.width(), image.channels());
        if upstream.len() != h * w * ch {
            return Err(Error::Shape(format!(
                "upstream has {} entries, expected {}",
                upstream.len(),
                h * w * ch
            )));
        }
        if let Some(pos) = upstream.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite upstream at index {pos}")));
        }

        let (d_image, flow_grad) = sampling_adjoint(image, &self.flow, upstream);
        let (d_points, d_dest) = self.spline_adjoint(&flow_grad);
        let d_displacements = d_dest.iter().map(|d| [self.alpha * d[0], self.alpha * d[1]]).collect();
        let d_points = d_points
            .iter()
            .zip(&d_dest)
            .map(|(a, b)| [a[0] + b[0], a[1] + b[1]])
            .collect();
        Ok(WarpCotangents {
            d_image,
            d_points,
            d_displacements,
        })
    }

    /// Pulls flow cotangents back to source points (the solve's right-hand
    /// side) and to destinations (kernel centers and system matrix).
    fn spline_adjoint(&self, flow_grad: &[Vec2]) -> (Vec<Vec2>, Vec<Vec2>) {
        let params = &self.spline.params;
        let centers = &params.centers;
        let k = centers.len();
        let (h, w) = (self.flow.height(), self.flow.width());

        // cotangent of the stacked solution [w; b; v₀; v₁]
        let mut d_solution = DMatrix::<f64>::zeros(k + 3, 2);
        let mut d_dest = vec![[0.0; 2]; k];
        for row in 0..h {
            let qv = crate::image::pixel_center_ndc(row, h);
            for col in 0..w {
                let g = flow_grad[row * w + col];
                if g[0] == 0.0 && g[1] == 0.0 {
                    continue;
                }
                let qu = crate::image::pixel_center_ndc(col, w);
                for (i, c) in centers.iter().enumerate() {
                    let (dx, dy) = (c[0] - qu, c[1] - qv);
                    let s = dx * dx + dy * dy;
                    let phi = kernel_sq(s);
                    d_solution[(i, 0)] += phi * g[0];
                    d_solution[(i, 1)] += phi * g[1];
                    let wg = params.weights[i][0] * g[0] + params.weights[i][1] * g[1];
                    let f = wg * kernel_grad_factor(s);
                    d_dest[i][0] += f * dx;
                    d_dest[i][1] += f * dy;
                }
                for d in 0..2 {
                    d_solution[(k, d)] += g[d];
                    d_solution[(k + 1, d)] += qu * g[d];
                    d_solution[(k + 2, d)] += qv * g[d];
                }
            }
        }

        // adjoint solve: the system matrix is symmetric
        let d_rhs = self.spline.solve(&d_solution);
        let mut solution = DMatrix::<f64>::zeros(k + 3, 2);
        for i in 0..k {
            solution[(i, 0)] = params.weights[i][0];
            solution[(i, 1)] = params.weights[i][1];
        }
        let rows = [params.offset, params.affine[0], params.affine[1]];
        for (r, row) in rows.iter().enumerate() {
            solution[(k + r, 0)] = row[0];
            solution[(k + r, 1)] = row[1];
        }
        let d_matrix = -(&d_rhs * solution.transpose());

        for m in 0..k {
            for j in 0..k {
                if j == m {
                    continue;
                }
                let (dx, dy) = (centers[m][0] - centers[j][0], centers[m][1] - centers[j][1]);
                let f = (d_matrix[(m, j)] + d_matrix[(j, m)]) * kernel_grad_factor(dx * dx + dy * dy);
                d_dest[m][0] += f * dx;
                d_dest[m][1] += f * dy;
            }
            d_dest[m][0] += d_matrix[(m, k + 1)] + d_matrix[(k + 1, m)];
            d_dest[m][1] += d_matrix[(m, k + 2)] + d_matrix[(k + 2, m)];
        }

        let d_points = (0..k).map(|i| [d_rhs[(i, 0)], d_rhs[(i, 1)]]).collect();
        (d_points, d_dest)
    }
}

/// Adjoint of [`sampler::resample`]: cotangents for the image and for each
/// flow entry (NDC units).
pub(crate) fn sampling_adjoint(image: &Image, flow: &FlowField, upstream: &[f64]) -> (Image, Vec<Vec2>) {
    let (h, w, ch) = (image.height(), image.width(), image.channels());
    let mut d_image = Image::zeros(h, w, ch);
    let mut flow_grad = vec![[0.0; 2]; flow.data().len()];
    let data = image.data();
    let (to_px_x, to_px_y) = (0.5 * w as f64, 0.5 * h as f64);
    for (n, at) in flow.data().iter().enumerate() {
        let ups = &upstream[n * ch..(n + 1) * ch];
        if ups.iter().all(|&u| u == 0.0) {
            continue;
        }
        let sx = locate(ndc_to_pixel(at[0], w), w);
        let sy = locate(ndc_to_pixel(at[1], h), h);
        let (fx, fy) = (sx.frac, sy.frac);
        let i00 = image.index(sy.lo, sx.lo, 0);
        let i10 = image.index(sy.lo, sx.hi, 0);
        let i01 = image.index(sy.hi, sx.lo, 0);
        let i11 = image.index(sy.hi, sx.hi, 0);
        let weights = [
            (i00, (1.0 - fx) * (1.0 - fy)),
            (i10, fx * (1.0 - fy)),
            (i01, (1.0 - fx) * fy),
            (i11, fx * fy),
        ];
        let (mut gx, mut gy) = (0.0, 0.0);
        let d = d_image.data_mut();
        for (c, &u) in ups.iter().enumerate() {
            for &(idx, wt) in &weights {
                d[idx + c] += u * wt;
            }
            let (v00, v10, v01, v11) = (data[i00 + c], data[i10 + c], data[i01 + c], data[i11 + c]);
            gx += u * ((1.0 - fy) * (v10 - v00) + fy * (v11 - v01));
            gy += u * ((1.0 - fx) * (v01 - v00) + fx * (v11 - v10));
        }
        flow_grad[n] = [
            if sx.active { gx * to_px_x } else { 0.0 },
            if sy.active { gy * to_px_y } else { 0.0 },
        ];
    }
    (d_image, flow_grad)
}

/// Vector-Jacobian product of `⟨upstream, warp_image(image, control, alpha, lambda)⟩`.
///
/// `upstream` is laid out like the image (H×W×C, row-major, interleaved).
pub fn warp_vjp(
    image: &Image,
    control: &ControlPointSet,
    alpha: f64,
    lambda: f64,
    upstream: &[f64],
) -> Result<WarpCotangents> {
    WarpTape::record(image, control, alpha, lambda)?.backward(image, upstream)
}

/// Central-difference step used by the checker.
pub const FD_STEP: f64 = 1e-5;
/// Relative tolerance between analytic and finite-difference gradients.
pub const FD_REL_TOL: f64 = 1e-4;
/// Absolute error bound for components smaller than `FD_ABS_FLOOR / FD_REL_TOL`.
pub const FD_ABS_FLOOR: f64 = 1e-7;
/// Destination pixels sampling within this many pixels of a cell boundary
/// are masked out of the checked objective.
pub const BOUNDARY_MARGIN: f64 = 1e-3;
/// Number of image entries differenced per instance.
pub const IMAGE_ENTRIES_CHECKED: usize = 64;

/// Outcome of one gradient check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    pub k: usize,
    /// Components compared (points, displacements and image entries).
    pub checked: usize,
    /// Control coordinates skipped because the difference stencil crossed a sampling cell boundary.
    pub skipped: usize,
    /// Pixels masked out of the objective for lying near a cell boundary.
    pub masked_pixels: usize,
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
    pub pass: bool,
}

/// One randomized gradient-check problem.
#[derive(Debug, Clone)]
pub struct GradCheckInstance {
    pub image: Image,
    pub control: ControlPointSet,
    pub alpha: f64,
    pub lambda: f64,
    pub upstream: Vec<f64>,
}

impl GradCheckInstance {
    /// Seeded smooth image, jittered-grid control points with displacements
    /// up to 0.1, and a uniform random upstream.
    pub fn generate(seed: u64, height: usize, width: usize, k: usize) -> Self {
        let mut rng = synth::seeded_rng(seed);
        let sigma = (height.min(width) as f64 / 8.0).max(1.0);
        let image = synth::smooth_image(&mut rng, height, width, 3, sigma);
        let control = synth::random_control(&mut rng, k, 0.1, 0.25);
        let upstream = (0..image.data().len())
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect();
        Self {
            image,
            control,
            alpha: 1.0,
            lambda: tps::DEFAULT_LAMBDA,
            upstream,
        }
    }
}

/// Stencil identity of every pixel, used to detect cell crossings.
fn stencil_signature(flow: &FlowField) -> Vec<(usize, bool, usize, bool)> {
    let (h, w) = (flow.height(), flow.width());
    flow.data()
        .iter()
        .map(|at| {
            let sx = locate(ndc_to_pixel(at[0], w), w);
            let sy = locate(ndc_to_pixel(at[1], h), h);
            (sx.lo, sx.active, sy.lo, sy.active)
        })
        .collect()
}

fn near_cell_boundary(x: f64) -> bool {
    (x - x.round()).abs() < BOUNDARY_MARGIN
}

/// Compares [`warp_vjp`] against central differences of the forward warp.
pub fn check_instance(instance: &GradCheckInstance, seed: u64) -> Result<GradCheckReport> {
    let GradCheckInstance {
        image,
        control,
        alpha,
        lambda,
        upstream,
    } = instance;
    let (h, w, ch) = (image.height(), image.width(), image.channels());
    let flow_of = |c: &ControlPointSet| -> Result<FlowField> {
        Ok(sampler::build_flow(&tps::fit(&c.scaled(*alpha), *lambda)?, h, w))
    };

    let base_flow = flow_of(control)?;
    let mut upstream = upstream.clone();
    let mut masked_pixels = 0;
    for (n, at) in base_flow.data().iter().enumerate() {
        if near_cell_boundary(ndc_to_pixel(at[0], w)) || near_cell_boundary(ndc_to_pixel(at[1], h)) {
            upstream[n * ch..(n + 1) * ch].iter_mut().for_each(|u| *u = 0.0);
            masked_pixels += 1;
        }
    }
    let live: Vec<bool> = upstream.chunks_exact(ch).map(|u| u.iter().any(|&v| v != 0.0)).collect();

    let analytic = warp_vjp(image, control, *alpha, *lambda, &upstream)?;
    let objective = |img: &Image, c: &ControlPointSet| -> Result<f64> {
        let out = sampler::warp_image(img, c, *alpha, *lambda)?;
        Ok(out.data().iter().zip(&upstream).map(|(a, b)| a * b).sum())
    };

    let mut max_rel: f64 = 0.0;
    let mut max_abs: f64 = 0.0;
    let mut checked = 0;
    let mut skipped = 0;
    let mut compare = |a: f64, fd: f64| {
        let diff = (a - fd).abs();
        max_abs = max_abs.max(diff);
        // below this scale the bound becomes an absolute one: diff < FD_ABS_FLOOR
        let scale = a.abs().max(fd.abs()).max(FD_ABS_FLOOR / FD_REL_TOL);
        max_rel = max_rel.max(diff / scale);
        checked += 1;
    };

    let k = control.len();
    for which in 0..2 {
        for i in 0..k {
            for d in 0..2 {
                let perturbed = |delta: f64| -> Result<ControlPointSet> {
                    let mut points = control.points().to_vec();
                    let mut disp = control.displacements().to_vec();
                    if which == 0 {
                        points[i][d] += delta;
                    } else {
                        disp[i][d] += delta;
                    }
                    ControlPointSet::new(points, disp)
                };
                let (plus, minus) = (perturbed(FD_STEP)?, perturbed(-FD_STEP)?);
                let sig_plus = stencil_signature(&flow_of(&plus)?);
                let sig_minus = stencil_signature(&flow_of(&minus)?);
                let crosses = sig_plus
                    .iter()
                    .zip(&sig_minus)
                    .zip(&live)
                    .any(|((a, b), &l)| l && a != b);
                if crosses {
                    skipped += 1;
                    continue;
                }
                let fd = (objective(image, &plus)? - objective(image, &minus)?) / (2.0 * FD_STEP);
                let a = if which == 0 {
                    analytic.d_points[i][d]
                } else {
                    analytic.d_displacements[i][d]
                };
                compare(a, fd);
            }
        }
    }

    let mut rng = synth::seeded_rng(seed ^ 0x9e37_79b9_7f4a_7c15);
    let total = image.data().len();
    for idx in sample_indices(&mut rng, total, IMAGE_ENTRIES_CHECKED.min(total)) {
        let bump = |delta: f64| {
            let mut data = image.data().to_vec();
            data[idx] += delta;
            Image::new(h, w, ch, data)
        };
        let fd = (objective(&bump(FD_STEP)?, control)? - objective(&bump(-FD_STEP)?, control)?)
            / (2.0 * FD_STEP);
        compare(analytic.d_image.data()[idx], fd);
    }

    Ok(GradCheckReport {
        seed,
        height: h,
        width: w,
        k,
        checked,
        skipped,
        masked_pixels,
        max_relative_error: max_rel,
        max_absolute_error: max_abs,
        pass: max_rel < FD_REL_TOL && skipped <= k,
    })
}

/// Generates a seeded instance and checks it. Mismatches are reported in the
/// result, not returned as errors.
pub fn check_gradients(seed: u64, height: usize, width: usize, k: usize) -> Result<GradCheckReport> {
    if height < 4 || width < 4 {
        return Err(Error::Parameter(format!(
            "gradient check needs at least 4x4 pixels, got {height}x{width}"
        )));
    }
    if !(3..=64).contains(&k) {
        return Err(Error::Parameter(format!(
            "gradient check needs 3 <= k <= 64, got {k}"
        )));
    }
    check_instance(&GradCheckInstance::generate(seed, height, width, k), seed)
}
