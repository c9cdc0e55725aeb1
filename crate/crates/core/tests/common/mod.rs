//! Reference implementations used as test oracles. None of these call into
//! the code paths they check.

#![allow(dead_code, clippy::needless_range_loop)]

use warpkit::{ControlPointSet, FlowField, Image, Vec2};

/// Dense Gaussian elimination with full pivoting on `a x = b` (b has `m` columns).
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    let m = b[0].len();
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let (mut pr, mut pc, mut best) = (col, col, 0.0);
        for r in col..n {
            for c in col..n {
                if a[r][c].abs() > best {
                    best = a[r][c].abs();
                    pr = r;
                    pc = c;
                }
            }
        }
        assert!(best > 0.0, "singular oracle system");
        a.swap(col, pr);
        b.swap(col, pr);
        for row in a.iter_mut() {
            row.swap(col, pc);
        }
        perm.swap(col, pc);
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            for c in 0..m {
                b[r][c] -= f * b[col][c];
            }
        }
    }
    let mut x = vec![vec![0.0; m]; n];
    for i in 0..n {
        for c in 0..m {
            x[perm[i]][c] = b[i][c] / a[i][i];
        }
    }
    x
}

pub fn phi(r: f64) -> f64 {
    if r == 0.0 {
        0.0
    } else {
        r * r * r.ln()
    }
}

/// Stacked `[w; b; v₀; v₁]` from interpolation conditions plus side conditions.
pub fn tps_oracle(control: &ControlPointSet, lambda: f64) -> Vec<Vec<f64>> {
    let d = control.destinations();
    let k = d.len();
    let mut a = vec![vec![0.0; k + 3]; k + 3];
    let mut b = vec![vec![0.0; 2]; k + 3];
    for i in 0..k {
        for j in 0..k {
            a[i][j] = phi(((d[i][0] - d[j][0]).powi(2) + (d[i][1] - d[j][1]).powi(2)).sqrt());
        }
        a[i][i] += lambda;
        a[i][k] = 1.0;
        a[i][k + 1] = d[i][0];
        a[i][k + 2] = d[i][1];
        a[k][i] = 1.0;
        a[k + 1][i] = d[i][0];
        a[k + 2][i] = d[i][1];
        b[i] = control.points()[i].to_vec();
    }
    gauss_solve(a, b)
}

pub fn tps_oracle_eval(control: &ControlPointSet, solution: &[Vec<f64>], q: Vec2) -> Vec2 {
    let d = control.destinations();
    let k = d.len();
    let mut out = [0.0; 2];
    for c in 0..2 {
        out[c] = solution[k][c] + q[0] * solution[k + 1][c] + q[1] * solution[k + 2][c];
        for i in 0..k {
            out[c] += solution[i][c] * phi(((q[0] - d[i][0]).powi(2) + (q[1] - d[i][1]).powi(2)).sqrt());
        }
    }
    out
}

/// Textbook clamp-to-edge bilinear lookup at NDC `(u, v)`.
pub fn bilinear_oracle(image: &Image, u: f64, v: f64) -> Vec<f64> {
    let (h, w) = (image.height(), image.width());
    let x = ((u + 1.0) * w as f64 / 2.0 - 0.5).clamp(0.0, (w - 1) as f64);
    let y = ((v + 1.0) * h as f64 / 2.0 - 0.5).clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    (0..image.channels())
        .map(|c| {
            let top = image.get(y0, x0, c) * (1.0 - fx) + image.get(y0, x1, c) * fx;
            let bottom = image.get(y1, x0, c) * (1.0 - fx) + image.get(y1, x1, c) * fx;
            top * (1.0 - fy) + bottom * fy
        })
        .collect()
}

pub fn sample_oracle(image: &Image, flow: &FlowField) -> Image {
    let mut data = Vec::new();
    for at in flow.data() {
        data.extend(bilinear_oracle(image, at[0], at[1]));
    }
    Image::new(flow.height(), flow.width(), image.channels(), data).unwrap()
}

pub fn center(i: usize, n: usize) -> f64 {
    (2 * i + 1) as f64 / n as f64 - 1.0
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Deterministic xorshift stream, independent of the crate's generator.
pub struct Xorshift(pub u64);

impl Xorshift {
    pub fn next_f64(&mut self) -> f64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

/// `k` uniform points in `[-1, 1]²` with displacements in `[-mag, mag]`,
/// redrawn until every destination pair is at least `min_sep` apart.
pub fn random_control(rng: &mut Xorshift, k: usize, mag: f64, min_sep: f64) -> ControlPointSet {
    loop {
        let points: Vec<Vec2> = (0..k).map(|_| [rng.range(-1.0, 1.0), rng.range(-1.0, 1.0)]).collect();
        let disp: Vec<Vec2> = (0..k).map(|_| [rng.range(-mag, mag), rng.range(-mag, mag)]).collect();
        let c = ControlPointSet::new(points, disp).unwrap();
        let d = c.destinations();
        let ok = (0..k).all(|i| {
            (i + 1..k).all(|j| ((d[i][0] - d[j][0]).powi(2) + (d[i][1] - d[j][1]).powi(2)).sqrt() >= min_sep)
        });
        if ok {
            return c;
        }
    }
}
