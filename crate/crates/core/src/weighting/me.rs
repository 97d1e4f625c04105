use crate::error::{Error, Result};

/// Linear measurement-error model `y* = β0 + β1 y + e`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeModel {
    pub beta0: f64,
    pub beta1: f64,
    pub residual_variance: f64,
    pub n_fit: usize,
}

impl MeModel {
    pub const IDENTITY: MeModel = MeModel {
        beta0: 0.0,
        beta1: 1.0,
        residual_variance: 0.0,
        n_fit: 0,
    };

    /// Inverts the model: `(y* − β0) / β1`.
    #[inline]
    pub fn correct(&self, y_star: f64) -> f64 {
        (y_star - self.beta0) / self.beta1
    }

    #[inline]
    pub fn forward(&self, y: f64) -> f64 {
        self.beta0 + self.beta1 * y
    }
}

/// Ordinary least squares of `y*` on `y` over linked pairs.
pub fn fit_me_model(y: &[f64], y_star: &[f64]) -> Result<MeModel> {
    fit_me_model_weighted(y, y_star, &vec![1.0; y.len()])
}

/// Weighted least squares of `y*` on `y`. With design weights on the linked
/// part of a probability sample this targets the regression over all of B.
pub fn fit_me_model_weighted(y: &[f64], y_star: &[f64], w: &[f64]) -> Result<MeModel> {
    let n = y.len();
    if y_star.len() != n || w.len() != n {
        return Err(Error::Invalid("measurement-error pairs have mismatched lengths".into()));
    }
    if n < 3 {
        return Err(Error::OverlapTooSmall(n));
    }
    if w.iter().any(|wi| !(*wi > 0.0) || !wi.is_finite()) {
        return Err(Error::Invalid("measurement-error fit weights must be positive".into()));
    }
    let sw: f64 = w.iter().sum();
    let my = y.iter().zip(w).map(|(a, wi)| wi * a).sum::<f64>() / sw;
    let ms = y_star.iter().zip(w).map(|(b, wi)| wi * b).sum::<f64>() / sw;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for ((a, b), wi) in y.iter().zip(y_star).zip(w) {
        sxx += wi * (a - my) * (a - my);
        sxy += wi * (a - my) * (b - ms);
    }
    if !(sxx > 0.0) {
        return Err(Error::DegenerateFit(0.0));
    }
    let beta1 = sxy / sxx;
    if beta1.abs() <= 1e-12 {
        return Err(Error::DegenerateFit(beta1));
    }
    let beta0 = ms - beta1 * my;
    let wrss: f64 = y
        .iter()
        .zip(y_star)
        .zip(w)
        .map(|((a, b), wi)| wi * (b - beta0 - beta1 * a).powi(2))
        .sum();
    let nf = n as f64;
    Ok(MeModel {
        beta0,
        beta1,
        residual_variance: wrss / sw * nf / (nf - 2.0),
        n_fit: n,
    })
}
