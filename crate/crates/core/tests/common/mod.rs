//! Independent reference implementations shared by the property and
//! acceptance tests. None of these call into the crate's numerical kernels.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use nonprob::design::{ConstraintSpec, Stratum, StratumKey};
use nonprob::population::SizeBand;

/// Calibrated weights from the full KKT system of
/// `min Σ (w − d)² / (2 d q)` subject to `Xᵀ w = T`.
pub fn calibration_kkt(d: &[f64], x: &[Vec<f64>], totals: &[f64], q: &[f64]) -> Option<Vec<f64>> {
    let (n, p) = (d.len(), totals.len());
    let mut m = DMatrix::<f64>::zeros(n + p, n + p);
    let mut rhs = DVector::<f64>::zeros(n + p);
    for i in 0..n {
        m[(i, i)] = 1.0 / (d[i] * q[i]);
        rhs[i] = 1.0 / q[i];
        for j in 0..p {
            m[(i, n + j)] = -x[i][j];
            m[(n + j, i)] = x[i][j];
        }
    }
    for j in 0..p {
        rhs[n + j] = totals[j];
    }
    let sol = m.lu().solve(&rhs)?;
    Some(sol.rows(0, n).iter().copied().collect())
}

/// Closed-form GREG weights `d (1 + q xᵀ (Σ d q x xᵀ)⁻¹ (T − Σ d x))` by
/// explicit matrix inversion.
pub fn greg_closed_form(d: &[f64], x: &[Vec<f64>], totals: &[f64], q: &[f64]) -> Option<Vec<f64>> {
    let p = totals.len();
    let mut t = DMatrix::<f64>::zeros(p, p);
    let mut ht = DVector::<f64>::zeros(p);
    for (i, row) in x.iter().enumerate() {
        let r = DVector::from_column_slice(row);
        t += d[i] * q[i] * &r * r.transpose();
        ht += d[i] * &r;
    }
    let lambda = t.try_inverse()? * (DVector::from_column_slice(totals) - ht);
    Some(
        x.iter()
            .enumerate()
            .map(|(i, row)| d[i] * (1.0 + q[i] * DVector::from_column_slice(row).dot(&lambda)))
            .collect(),
    )
}

pub fn chi_square_distance(w: &[f64], d: &[f64], q: &[f64]) -> f64 {
    w.iter().zip(d).zip(q).map(|((w, d), q)| (w - d).powi(2) / (2.0 * d * q)).sum()
}

/// Brute-force constrained minimizer: starts from the least-norm feasible
/// point and runs exact coordinate descent along an orthonormal basis of the
/// constraint null space.
pub fn calibration_brute_force(d: &[f64], x: &[Vec<f64>], totals: &[f64], q: &[f64]) -> Vec<f64> {
    let (n, p) = (d.len(), totals.len());
    let a = DMatrix::from_fn(p, n, |j, i| x[i][j]);
    let svd = a.clone().svd(true, true);
    let pinv = svd.clone().pseudo_inverse(1e-12).expect("pseudo-inverse");
    let mut w: DVector<f64> = pinv * DVector::from_column_slice(totals);
    let v_t = svd.v_t.expect("right singular vectors");
    let rank = svd.singular_values.iter().filter(|s| **s > 1e-10).count();
    // complete the row space to a basis of R^n, then keep the null-space part
    let mut basis: Vec<DVector<f64>> = v_t.rows(0, rank).row_iter().map(|r| r.transpose()).collect();
    let mut null = Vec::new();
    for k in 0..n {
        let mut e = DVector::<f64>::zeros(n);
        e[k] = 1.0;
        for b in basis.iter() {
            let c = b.dot(&e);
            e -= c * b;
        }
        let norm = e.norm();
        if norm > 1e-8 {
            e /= norm;
            basis.push(e.clone());
            null.push(e);
        }
    }
    let h: Vec<f64> = (0..n).map(|i| 1.0 / (d[i] * q[i])).collect();
    for _ in 0..20_000 {
        let mut moved = 0.0f64;
        for z in &null {
            // f(t) = Σ h_i (w_i + t z_i − d_i)² / 2, minimized at t = −Σ h z (w − d) / Σ h z²
            let num: f64 = (0..n).map(|i| h[i] * z[i] * (w[i] - d[i])).sum();
            let den: f64 = (0..n).map(|i| h[i] * z[i] * z[i]).sum();
            let t = -num / den;
            w += t * z;
            moved = moved.max(t.abs());
        }
        if moved < 1e-15 {
            break;
        }
    }
    w.iter().copied().collect()
}

/// Textbook IRLS for weighted logistic regression using the working response.
pub fn irls_logistic(y: &[bool], x: &[Vec<f64>], w: &[f64]) -> Option<Vec<f64>> {
    let p = x[0].len();
    let mut beta = DVector::<f64>::zeros(p);
    for _ in 0..200 {
        let mut xtwx = DMatrix::<f64>::zeros(p, p);
        let mut xtwz = DVector::<f64>::zeros(p);
        for ((row, &yi), &wi) in x.iter().zip(y).zip(w) {
            let r = DVector::from_column_slice(row);
            let eta = r.dot(&beta);
            let mu = 1.0 / (1.0 + (-eta).exp());
            let v = mu * (1.0 - mu);
            let z = eta + (f64::from(u8::from(yi)) - mu) / v;
            xtwx += wi * v * &r * r.transpose();
            xtwz += wi * v * z * &r;
        }
        let next = xtwx.cholesky()?.solve(&xtwz);
        let step = (&next - &beta).amax();
        beta = next;
        if step < 1e-13 * (1.0 + beta.amax()) {
            return Some(beta.iter().copied().collect());
        }
    }
    None
}

/// Small allocation problem: per-stratum population sizes, SDs and totals,
/// with the industry code of each stratum.
#[derive(Debug, Clone)]
pub struct GridProblem {
    pub n_pop: Vec<usize>,
    pub s: Vec<f64>,
    pub y: Vec<f64>,
    pub industry: Vec<u8>,
    pub take_all: Vec<bool>,
}

impl GridProblem {
    pub fn strata(&self) -> Vec<Stratum> {
        let mut next = 0;
        (0..self.n_pop.len())
            .map(|h| {
                let units: Vec<usize> = (next..next + self.n_pop[h]).collect();
                next += self.n_pop[h];
                Stratum {
                    key: StratumKey {
                        state: h as u8,
                        industry: self.industry[h],
                        band: if self.take_all[h] { SizeBand::Large } else { SizeBand::Medium },
                    },
                    units,
                    s_h: self.s[h],
                    y_total: self.y[h],
                    take_all: self.take_all[h],
                }
            })
            .collect()
    }

    fn in_domain(&self, c: &ConstraintSpec, h: usize) -> bool {
        use nonprob::design::Domain;
        match c.domain {
            Domain::National => true,
            Domain::Industry(d) => self.industry[h] == d,
            Domain::State(s) => h as u8 == s,
        }
    }

    fn feasible(&self, n: &[usize], constraints: &[ConstraintSpec]) -> bool {
        constraints.iter().all(|c| {
            let (mut v, mut y, mut any) = (0.0, 0.0, false);
            for h in 0..n.len() {
                if self.in_domain(c, h) {
                    any = true;
                    let big = self.n_pop[h] as f64;
                    v += big * big * self.s[h] * self.s[h] * (1.0 / n[h] as f64 - 1.0 / big);
                    y += self.y[h];
                }
            }
            !any || y == 0.0 || v.max(0.0).sqrt() <= (c.target_rse + 1e-12) * y.abs()
        })
    }

    /// Exhaustive search over integer allocations with step 1. Returns the
    /// minimum feasible total, if any.
    pub fn grid_minimum(&self, constraints: &[ConstraintSpec], min_n: usize) -> Option<usize> {
        let h = self.n_pop.len();
        let lo: Vec<usize> = (0..h)
            .map(|k| {
                if self.take_all[k] || self.n_pop[k] <= min_n {
                    self.n_pop[k]
                } else {
                    min_n
                }
            })
            .collect();
        let mut n = lo.clone();
        let mut best: Option<usize> = None;
        loop {
            let total: usize = n.iter().sum();
            if best.is_none_or(|b| total < b) && self.feasible(&n, constraints) {
                best = Some(total);
            }
            // odometer increment
            let mut k = 0;
            loop {
                if k == h {
                    return best;
                }
                if n[k] < self.n_pop[k] {
                    n[k] += 1;
                    break;
                }
                n[k] = lo[k];
                k += 1;
            }
        }
    }

    pub fn is_feasible(&self, n: &[usize], constraints: &[ConstraintSpec]) -> bool {
        self.feasible(n, constraints)
    }
}
