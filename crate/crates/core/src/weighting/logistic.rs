use nalgebra::DVector;

use crate::bigdata::inverse_logit;
use crate::error::{Error, Result};
use crate::linalg::{solve_symmetric, Design};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticOptions {
    pub max_iter: usize,
    /// Convergence threshold on the score norm, relative to `1 + Σ w`.
    pub gradient_tol: f64,
    /// Linear predictors beyond this magnitude on fitted units signal
    /// separation.
    pub separation_eta: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            gradient_tol: 1e-12,
            separation_eta: 30.0,
        }
    }
}

/// Weighted Bernoulli log-likelihood `Σ w [δ log p + (1−δ) log(1−p)]`.
pub fn log_likelihood(delta: &[bool], x: &Design, w: &[f64], beta: &[f64]) -> f64 {
    (0..x.rows())
        .map(|i| {
            let eta = x.dot_row(i, beta);
            // log p = -log(1 + e^-η), log(1-p) = -log(1 + e^η)
            let l = if delta[i] { -softplus(-eta) } else { -softplus(eta) };
            w[i] * l
        })
        .sum()
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Score vector `Σ w (δ − p) x`.
pub fn score(delta: &[bool], x: &Design, w: &[f64], beta: &[f64]) -> Vec<f64> {
    let resid: Vec<f64> = (0..x.rows())
        .map(|i| f64::from(u8::from(delta[i])) - inverse_logit(x.dot_row(i, beta)))
        .collect();
    x.weighted_cross(w, &resid).as_slice().to_vec()
}

/// Maximum weighted likelihood logistic regression by Newton–Raphson (IRLS)
/// with step halving.
pub fn fit_logistic_weighted(delta: &[bool], x: &Design, w: &[f64], opts: &LogisticOptions) -> Result<Vec<f64>> {
    let n = x.rows();
    if delta.len() != n || w.len() != n {
        return Err(Error::Invalid("logistic inputs have mismatched lengths".into()));
    }
    let (w1, w0) = delta.iter().zip(w).fold((0.0, 0.0), |(a, b), (&d, &wi)| {
        if d {
            (a + wi, b)
        } else {
            (a, b + wi)
        }
    });
    if w1 <= 0.0 || w0 <= 0.0 {
        return Err(Error::Separation);
    }
    let p = x.cols();
    let mut beta = vec![0.0; p];
    let scale = 1.0 + w1 + w0;
    let mut ll = log_likelihood(delta, x, w, &beta);
    for _ in 0..opts.max_iter {
        let mut hw = vec![0.0; n];
        let mut resid = vec![0.0; n];
        for i in 0..n {
            let pi = inverse_logit(x.dot_row(i, &beta));
            hw[i] = w[i] * pi * (1.0 - pi);
            resid[i] = f64::from(u8::from(delta[i])) - pi;
        }
        let grad = x.weighted_cross(w, &resid);
        if grad.norm() <= opts.gradient_tol * scale {
            check_separation(x, w, &beta, opts)?;
            return Ok(beta);
        }
        let info = x.weighted_gram(&hw);
        let step = match solve_symmetric(&info, &grad) {
            Ok(s) => s,
            // a collapsing information matrix with a nonzero score means the
            // fitted probabilities are running to 0 or 1
            Err(_) if beta.iter().any(|b| b.abs() > 0.0) => return Err(Error::Separation),
            Err(e) => return Err(e),
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b + t * s).collect();
            let cand_ll = log_likelihood(delta, x, w, &cand);
            if cand_ll >= ll - 1e-12 * ll.abs() {
                beta = cand;
                ll = cand_ll;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    check_separation(x, w, &beta, opts)?;
    let g = DVector::from_vec(score(delta, x, w, &beta)).norm();
    if g <= 1e-8 * scale {
        return Ok(beta);
    }
    Err(Error::NoConvergence {
        what: "weighted logistic regression",
        iterations: opts.max_iter,
    })
}

fn check_separation(x: &Design, w: &[f64], beta: &[f64], opts: &LogisticOptions) -> Result<()> {
    let extreme = (0..x.rows()).any(|i| w[i] > 0.0 && x.dot_row(i, beta).abs() > opts.separation_eta);
    if extreme {
        Err(Error::Separation)
    } else {
        Ok(())
    }
}
