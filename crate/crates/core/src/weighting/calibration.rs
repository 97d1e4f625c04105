use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{solve_symmetric, Design};

/// Chi-square distance calibration of `d` to benchmark totals.
#[derive(Debug, Clone, Copy)]
pub struct CalibrationProblem<'a> {
    pub d: &'a [f64],
    pub x: &'a Design,
    pub totals: &'a [f64],
    /// Per-unit tuning constants; `None` means q ≡ 1.
    pub q: Option<&'a [f64]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibrated {
    pub weights: Vec<f64>,
    pub lambda: Vec<f64>,
    pub negative_weights: usize,
}

impl CalibrationProblem<'_> {
    fn q(&self, i: usize) -> f64 {
        self.q.map_or(1.0, |q| q[i])
    }

    fn weights_for(&self, lambda: &[f64]) -> Vec<f64> {
        (0..self.d.len())
            .map(|i| self.d[i] * (1.0 + self.q(i) * self.x.dot_row(i, lambda)))
            .collect()
    }

    fn residual(&self, w: &[f64]) -> DVector<f64> {
        let achieved = self.x.weighted_cross(w, &vec![1.0; w.len()]);
        DVector::from_column_slice(self.totals) - achieved
    }
}

/// Solves `(Σ d q x xᵀ) λ = X − Σ d x` and returns `w = d (1 + q xᵀλ)`.
///
/// One step of iterative refinement is applied when the first solve leaves a
/// benchmark residual above `1e-8 (1 + ‖X‖)`. Negative weights are counted,
/// not truncated.
pub fn chi_square_calibrate(p: &CalibrationProblem<'_>) -> Result<Calibrated> {
    let n = p.d.len();
    if p.x.rows() != n || p.totals.len() != p.x.cols() || p.q.is_some_and(|q| q.len() != n) {
        return Err(Error::Invalid("calibration inputs have mismatched dimensions".into()));
    }
    if let Some(d) = p.d.iter().find(|d| !(**d > 0.0) || !d.is_finite()) {
        return Err(Error::Invalid(format!("initial weight {d} is not positive")));
    }
    let dq: Vec<f64> = (0..n).map(|i| p.d[i] * p.q(i)).collect();
    let gram = p.x.weighted_gram(&dq);
    let mut lambda = solve_symmetric(&gram, &p.residual(p.d))?;
    let mut w = p.weights_for(lambda.as_slice());
    let bound = 1e-8 * (1.0 + DVector::from_column_slice(p.totals).norm());
    let r = p.residual(&w);
    if r.norm() > bound {
        lambda += solve_symmetric(&gram, &r)?;
        w = p.weights_for(lambda.as_slice());
    }
    Ok(Calibrated {
        negative_weights: w.iter().filter(|&&v| v < 0.0).count(),
        weights: w,
        lambda: lambda.as_slice().to_vec(),
    })
}
