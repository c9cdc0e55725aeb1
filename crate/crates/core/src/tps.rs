//! Closed-form thin-plate-spline fitting and evaluation.
//!
//! A [`ControlPointSet`] pairs source points `p` with displacements `Δp`; the
//! spline fitted by [`fit`] maps every destination `p' = p + Δp` back to its
//! source `p`, so evaluating it at a destination pixel gives the location the
//! pixel should be sampled from.

use nalgebra::{DMatrix, Dyn, LU};

use crate::error::{Error, Result};
use crate::image::Vec2;

/// Destinations closer than this are treated as duplicates.
pub const MIN_POINT_SEPARATION: f64 = 1e-8;
/// Default curvature relaxation added to the kernel diagonal.
pub const DEFAULT_LAMBDA: f64 = 1e-6;
/// Default number of control points.
pub const DEFAULT_CONTROL_POINTS: usize = 16;
/// Upper bound on control points; keeps the dense solve small.
pub const MAX_CONTROL_POINTS: usize = 128;

const MAX_CONDITION: f64 = 1e14;
const COLLINEAR_RATIO: f64 = 1e-12;

/// Radial basis `φ(r) = r² ln r`, with `φ(0) = 0`.
pub fn kernel(r: f64) -> Result<f64> {
    if r.is_nan() || r < 0.0 {
        return Err(Error::Domain(format!("kernel radius must be >= 0, got {r}")));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    Ok(r * r * r.ln())
}

/// `φ` as a function of the squared radius `s = r²`, i.e. `½ s ln s`.
#[inline]
pub(crate) fn kernel_sq(s: f64) -> f64 {
    if s > 0.0 {
        0.5 * s * s.ln()
    } else {
        0.0
    }
}

/// `φ'(r) / r = 2 ln r + 1 = ln s + 1`, zero at the origin where `φ'(r) → 0`.
#[inline]
pub(crate) fn kernel_grad_factor(s: f64) -> f64 {
    if s > 0.0 {
        s.ln() + 1.0
    } else {
        0.0
    }
}

#[inline]
fn dist_sq(a: Vec2, b: Vec2) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// Source points and their displacements, in NDC.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPointSet {
    points: Vec<Vec2>,
    displacements: Vec<Vec2>,
}

impl ControlPointSet {
    pub fn new(points: Vec<Vec2>, displacements: Vec<Vec2>) -> Result<Self> {
        if points.len() != displacements.len() {
            return Err(Error::Shape(format!(
                "{} points but {} displacements",
                points.len(),
                displacements.len()
            )));
        }
        let k = points.len();
        if !(3..=MAX_CONTROL_POINTS).contains(&k) {
            return Err(Error::Parameter(format!(
                "control point count must be in 3..={MAX_CONTROL_POINTS}, got {k}"
            )));
        }
        let finite = |v: &Vec2| v[0].is_finite() && v[1].is_finite();
        if !points.iter().chain(&displacements).all(finite) {
            return Err(Error::Domain("control points must be finite".into()));
        }
        Ok(Self {
            points,
            displacements,
        })
    }

    /// Control points that do not move.
    pub fn pinned(points: Vec<Vec2>) -> Result<Self> {
        let zeros = vec![[0.0; 2]; points.len()];
        Self::new(points, zeros)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn displacements(&self) -> &[Vec2] {
        &self.displacements
    }

    pub fn destination(&self, i: usize) -> Vec2 {
        let p = self.points[i];
        let d = self.displacements[i];
        [p[0] + d[0], p[1] + d[1]]
    }

    pub fn destinations(&self) -> Vec<Vec2> {
        (0..self.len()).map(|i| self.destination(i)).collect()
    }

    /// Same points with every displacement multiplied by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            points: self.points.clone(),
            displacements: self
                .displacements
                .iter()
                .map(|d| [alpha * d[0], alpha * d[1]])
                .collect(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.displacements.iter().all(|d| d[0] == 0.0 && d[1] == 0.0)
    }
}

/// Fitted spline `f(q) = Σ wᵢ φ(‖q − cᵢ‖) + vᵀq + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct TpsParameters {
    pub weights: Vec<Vec2>,
    /// Row `r` multiplies coordinate `q[r]`.
    pub affine: [Vec2; 2],
    pub offset: Vec2,
    pub centers: Vec<Vec2>,
    pub regularization: f64,
}

impl TpsParameters {
    /// The spline that maps every point to itself.
    pub fn identity(centers: Vec<Vec2>) -> Self {
        Self {
            weights: vec![[0.0; 2]; centers.len()],
            affine: [[1.0, 0.0], [0.0, 1.0]],
            offset: [0.0; 2],
            centers,
            regularization: 0.0,
        }
    }

    pub fn evaluate(&self, q: Vec2) -> Vec2 {
        evaluate(self, q)
    }
}

/// Evaluates the fitted inverse mapping at `q`. No clamping is applied.
pub fn evaluate(params: &TpsParameters, q: Vec2) -> Vec2 {
    let [v0, v1] = params.affine;
    let mut out = [
        params.offset[0] + v0[0] * q[0] + v1[0] * q[1],
        params.offset[1] + v0[1] * q[0] + v1[1] * q[1],
    ];
    for (w, &c) in params.weights.iter().zip(&params.centers) {
        let phi = kernel_sq(dist_sq(q, c));
        out[0] += w[0] * phi;
        out[1] += w[1] * phi;
    }
    out
}

/// A fit together with the factorized system, kept for adjoint solves.
pub(crate) struct FittedSpline {
    pub params: TpsParameters,
    lu: LU<f64, Dyn, Dyn>,
}

impl FittedSpline {
    /// Solves `A x = rhs` with the factorized (symmetric) spline matrix.
    pub fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        self.lu
            .solve(rhs)
            .expect("factorization was checked invertible at fit time")
    }
}

/// Fits the spline mapping destinations back to source points.
///
/// `lambda` relaxes interpolation for smoothness; `0` interpolates exactly.
pub fn fit(control: &ControlPointSet, lambda: f64) -> Result<TpsParameters> {
    fit_system(control, lambda).map(|f| f.params)
}

pub(crate) fn check_destinations(dest: &[Vec2]) -> Result<()> {
    for i in 0..dest.len() {
        for j in i + 1..dest.len() {
            let distance = dist_sq(dest[i], dest[j]).sqrt();
            if distance < MIN_POINT_SEPARATION {
                return Err(Error::DuplicatePoints {
                    first: i,
                    second: j,
                    distance,
                });
            }
        }
    }
    let n = dest.len() as f64;
    let mean = dest
        .iter()
        .fold([0.0; 2], |acc, d| [acc[0] + d[0] / n, acc[1] + d[1] / n]);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for d in dest {
        let (x, y) = (d[0] - mean[0], d[1] - mean[1]);
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
    }
    // eigenvalues of the 2x2 scatter matrix; the small one via det / large
    let trace = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    let largest = 0.5 * trace + (0.25 * (sxx - syy).powi(2) + sxy * sxy).sqrt();
    let smallest = if largest > 0.0 { det / largest } else { 0.0 };
    if !(smallest > COLLINEAR_RATIO * trace) {
        return Err(Error::Collinear);
    }
    Ok(())
}

pub(crate) fn system_matrix(dest: &[Vec2], lambda: f64) -> DMatrix<f64> {
    let k = dest.len();
    let n = k + 3;
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..k {
        a[(i, i)] = lambda;
        for j in i + 1..k {
            let phi = kernel_sq(dist_sq(dest[i], dest[j]));
            a[(i, j)] = phi;
            a[(j, i)] = phi;
        }
        let row = [1.0, dest[i][0], dest[i][1]];
        for (c, &value) in row.iter().enumerate() {
            a[(i, k + c)] = value;
            a[(k + c, i)] = value;
        }
    }
    a
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|col| col.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub(crate) fn fit_system(control: &ControlPointSet, lambda: f64) -> Result<FittedSpline> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!(
            "regularization must be finite and >= 0, got {lambda}"
        )));
    }
    let dest = control.destinations();
    check_destinations(&dest)?;
    let k = dest.len();
    let a = system_matrix(&dest, lambda);
    let lu = a.clone().lu();
    let inverse = lu.try_inverse().ok_or(Error::Singular {
        condition: f64::INFINITY,
    })?;
    let condition = norm1(&a) * norm1(&inverse);
    if !(condition < MAX_CONDITION) {
        return Err(Error::Singular { condition });
    }

    let mut rhs = DMatrix::<f64>::zeros(k + 3, 2);
    for (i, p) in control.points().iter().enumerate() {
        rhs[(i, 0)] = p[0];
        rhs[(i, 1)] = p[1];
    }
    let mut x = lu.solve(&rhs).ok_or(Error::Singular { condition })?;
    // one step of iterative refinement
    let residual = &rhs - &a * &x;
    if let Some(dx) = lu.solve(&residual) {
        x += dx;
    }

    let weights = (0..k).map(|i| [x[(i, 0)], x[(i, 1)]]).collect();
    let params = TpsParameters {
        weights,
        affine: [[x[(k + 1, 0)], x[(k + 1, 1)]], [x[(k + 2, 0)], x[(k + 2, 1)]]],
        offset: [x[(k, 0)], x[(k, 1)]],
        centers: dest,
        regularization: lambda,
    };
    Ok(FittedSpline { params, lu })
}
