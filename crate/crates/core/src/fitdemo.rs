//! Recovers a warp by gradient descent through the differentiable warp.
//!
//! Control points start on a regular grid with zero displacement. Each
//! iteration warps the source, measures the mean absolute difference to the
//! target and follows [`warp_vjp`](crate::warp_grad::warp_vjp) gradients
//! with bias-corrected adaptive moment updates. Recovery is judged in image
//! space (PSNR): different control layouts can produce the same warp.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::image::{Image, Vec2};
use crate::losses::identity_mapping_loss;
use crate::sampler::warp_image;
use crate::synth;
use crate::tps::{self, ControlPointSet};
use crate::warp_grad::WarpTape;

/// Optimizer settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitConfig {
    pub k: usize,
    pub iterations: usize,
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            k: tps::DEFAULT_CONTROL_POINTS,
            iterations: 2000,
            step_size: 0.05,
            beta1: 0.9,
            beta2: 0.999,
            lambda: tps::DEFAULT_LAMBDA,
            seed: 0,
        }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Parameter(format!("invalid fit config: {what}")));
        if !(3..=tps::MAX_CONTROL_POINTS).contains(&self.k) {
            return bad("k out of range");
        }
        if self.iterations == 0 {
            return bad("iterations must be positive");
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return bad("step size must be positive");
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return bad("moment coefficients must lie in [0, 1)");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be finite and >= 0");
        }
        Ok(())
    }
}

/// Result of a fit. `psnr_db` is infinite when the best warp matches exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub control: ControlPointSet,
    pub trajectory: Vec<f64>,
    pub best_loss: f64,
    pub best_iteration: usize,
    pub psnr_db: f64,
}

impl FitReport {
    /// Running minimum of the loss trajectory.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.trajectory
            .iter()
            .scan(f64::INFINITY, |best, &l| {
                *best = best.min(l);
                Some(*best)
            })
            .collect()
    }
}

/// Peak signal-to-noise ratio for unit peak; infinite for identical images.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    a.ensure_same_shape(b)?;
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.data().len() as f64;
    Ok(if mse == 0.0 { f64::INFINITY } else { -10.0 * mse.log10() })
}

struct Adam {
    beta1: f64,
    beta2: f64,
    step_size: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const EPS: f64 = 1e-8;

    fn new(n: usize, config: &FitConfig) -> Self {
        Self {
            beta1: config.beta1,
            beta2: config.beta2,
            step_size: config.step_size,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], step_size: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= step_size * m_hat / (v_hat.sqrt() + Self::EPS);
        }
    }
}

const DIVERGENCE_FACTOR: f64 = 10.0;
const DIVERGENCE_PATIENCE: usize = 100;

fn unpack(theta: &[f64], k: usize) -> Result<ControlPointSet> {
    let pairs = |s: &[f64]| s.chunks_exact(2).map(|c| [c[0], c[1]]).collect::<Vec<Vec2>>();
    ControlPointSet::new(pairs(&theta[..2 * k]), pairs(&theta[2 * k..]))
}

/// Fits control points so that warping `source` reproduces `target`.
pub fn fit_warp(source: &Image, target: &Image, config: &FitConfig) -> Result<FitReport> {
    config.validate()?;
    source.ensure_same_shape(target)?;
    let k = config.k;
    let n = source.data().len() as f64;

    let mut theta: Vec<f64> = synth::grid_points(k)
        .into_iter()
        .flat_map(|p| p.into_iter())
        .chain(std::iter::repeat_n(0.0, 2 * k))
        .collect();
    let mut adam = Adam::new(theta.len(), config);
    let mut trajectory = Vec::with_capacity(config.iterations);
    let mut best: Option<(f64, usize, ControlPointSet)> = None;
    let mut initial = None;
    let mut over_budget = 0;
    let mut upstream = vec![0.0; source.data().len()];
    let mut grad = vec![0.0; theta.len()];

    for it in 0..config.iterations {
        let control = unpack(&theta, k)?;
        let tape = WarpTape::record(source, &control, 1.0, config.lambda)?;
        let loss = identity_mapping_loss(&tape.output, target)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { trajectory });
        }
        trajectory.push(loss);
        let initial_loss = *initial.get_or_insert(loss);
        if loss > DIVERGENCE_FACTOR * initial_loss {
            over_budget += 1;
            if over_budget >= DIVERGENCE_PATIENCE {
                return Err(Error::Divergence { trajectory });
            }
        } else {
            over_budget = 0;
        }
        if best.as_ref().is_none_or(|(b, _, _)| loss < *b) {
            best = Some((loss, it, control.clone()));
        }
        if loss == 0.0 {
            break;
        }

        for ((u, o), t) in upstream.iter_mut().zip(tape.output.data()).zip(target.data()) {
            let diff = o - t;
            *u = if diff > 0.0 {
                1.0 / n
            } else if diff < 0.0 {
                -1.0 / n
            } else {
                0.0
            };
        }
        let cot = tape.backward(source, &upstream)?;
        for (i, g) in cot.d_points.iter().chain(&cot.d_displacements).enumerate() {
            grad[2 * i] = g[0];
            grad[2 * i + 1] = g[1];
        }
        adam.step(&mut theta, &grad, adam.step_size);
    }

    // an exact match stops early; the remaining iterations would repeat it
    let last = *trajectory.last().expect("at least one iteration runs");
    trajectory.resize(config.iterations, last);

    let (best_loss, best_iteration, control) = best.expect("at least one iteration runs");
    let recovered = warp_image(source, &control, 1.0, config.lambda)?;
    Ok(FitReport {
        psnr_db: psnr(&recovered, target)?,
        control,
        trajectory,
        best_loss,
        best_iteration,
    })
}

/// Largest displacement magnitude accepted by [`roundtrip`].
pub const MAX_ROUNDTRIP_MAGNITUDE: f64 = 0.2;

/// Warps a seeded smooth image by a seeded random control set, then recovers it.
pub fn roundtrip(seed: u64, height: usize, width: usize, k: usize, magnitude: f64, config: &FitConfig) -> Result<FitReport> {
    if !(0.0..=MAX_ROUNDTRIP_MAGNITUDE).contains(&magnitude) {
        return Err(Error::Parameter(format!(
            "displacement magnitude must lie in [0, {MAX_ROUNDTRIP_MAGNITUDE}], got {magnitude}"
        )));
    }
    let mut rng = synth::seeded_rng(seed);
    let sigma = (height.min(width) as f64 / 16.0).max(1.0);
    let source = synth::smooth_image(&mut rng, height, width, 3, sigma);
    let truth = synth::random_control(&mut rng, k, magnitude, 0.25);
    let target = warp_image(&source, &truth, 1.0, config.lambda)?;
    fit_warp(&source, &target, &FitConfig { k, seed, ..config.clone() })
}
