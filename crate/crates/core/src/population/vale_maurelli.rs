use rand::Rng as _;
use rand_distr::StandardNormal;

use super::fleishman::{solve_fleishman, FleishmanCoeffs, MomentSpec};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Correlation of two power-transformed variates whose underlying normals have
/// correlation `r`.
pub fn transformed_correlation(x: &FleishmanCoeffs, y: &FleishmanCoeffs, r: f64) -> f64 {
    let lin = x.b * y.b + 3.0 * x.b * y.d + 3.0 * x.d * y.b + 9.0 * x.d * y.d;
    r * lin + r * r * 2.0 * x.c * y.c + r.powi(3) * 6.0 * x.d * y.d
}

/// Normal-scale correlation that yields `target` after both transforms.
/// Roots of the cubic in [-1, 1] are located on a grid and refined by
/// bisection; the root nearest `target` wins.
pub fn intermediate_correlation(
    x: &FleishmanCoeffs,
    y: &FleishmanCoeffs,
    target: f64,
) -> Result<f64> {
    let f = |r: f64| transformed_correlation(x, y, r) - target;
    if f(0.0) == 0.0 {
        return Ok(0.0);
    }
    let steps = 2000;
    let mut best: Option<f64> = None;
    let mut prev_r = -1.0;
    let mut prev_f = f(prev_r);
    for i in 1..=steps {
        let r = -1.0 + 2.0 * i as f64 / steps as f64;
        let fr = f(r);
        let root = if prev_f == 0.0 {
            Some(prev_r)
        } else if fr == 0.0 {
            Some(r)
        } else if prev_f.signum() != fr.signum() {
            let (mut lo, mut hi, mut flo) = (prev_r, r, prev_f);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid);
                if fm == 0.0 || hi - lo < 1e-16 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            Some(0.5 * (lo + hi))
        } else {
            None
        };
        if let Some(root) = root {
            if best.is_none_or(|b| (root - target).abs() < (b - target).abs()) {
                best = Some(root);
            }
        }
        prev_r = r;
        prev_f = fr;
    }
    best.ok_or(Error::IntermediateCorrelationOutOfRange(target))
}

/// A prepared generator for one (frame, reported) employment pair law.
#[derive(Debug, Clone)]
pub struct PairGenerator {
    pub spec_x: MomentSpec,
    pub spec_y: MomentSpec,
    pub coeffs_x: FleishmanCoeffs,
    pub coeffs_y: FleishmanCoeffs,
    pub normal_correlation: f64,
}

impl PairGenerator {
    pub fn new(spec_x: MomentSpec, spec_y: MomentSpec, target_cov: f64) -> Result<Self> {
        let coeffs_x = solve_fleishman(&spec_x)?;
        let coeffs_y = solve_fleishman(&spec_y)?;
        let target = target_cov / (spec_x.sd() * spec_y.sd());
        if !(target.abs() < 1.0) {
            return Err(Error::IntermediateCorrelationOutOfRange(target));
        }
        let r = intermediate_correlation(&coeffs_x, &coeffs_y, target)?;
        if !(r.abs() <= 1.0) {
            return Err(Error::IntermediateCorrelationOutOfRange(r));
        }
        Ok(Self {
            spec_x,
            spec_y,
            coeffs_x,
            coeffs_y,
            normal_correlation: r,
        })
    }

    #[inline]
    pub fn draw(&self, rng: &mut Rng) -> (f64, f64) {
        let z1: f64 = rng.sample(StandardNormal);
        let e: f64 = rng.sample(StandardNormal);
        let r = self.normal_correlation;
        let z2 = r * z1 + (1.0 - r * r).sqrt() * e;
        (
            self.spec_x.mean + self.spec_x.sd() * self.coeffs_x.apply(z1),
            self.spec_y.mean + self.spec_y.sd() * self.coeffs_y.apply(z2),
        )
    }

    pub fn generate(&self, n: usize, rng: &mut Rng) -> (Vec<f64>, Vec<f64>) {
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let (x, y) = self.draw(rng);
            xs.push(x);
            ys.push(y);
        }
        (xs, ys)
    }
}

/// Draws `n` correlated non-normal pairs with the given marginal moments and
/// covariance.
pub fn vale_maurelli_pair(
    spec_x: &MomentSpec,
    spec_y: &MomentSpec,
    target_cov: f64,
    n: usize,
    rng: &mut Rng,
) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok(PairGenerator::new(*spec_x, *spec_y, target_cov)?.generate(n, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn empty_request_gives_empty_vectors() {
        let s = MomentSpec::new(8.0, 4.5, 1.1, 2.0);
        let (x, y) = vale_maurelli_pair(&s, &s, 1.0, 0, &mut stream(1, &[])).unwrap();
        assert!(x.is_empty() && y.is_empty());
    }

    #[test]
    fn intermediate_correlation_inverts_the_cubic() {
        let a = solve_fleishman(&MomentSpec::new(0.0, 1.0, 2.3, 9.0)).unwrap();
        let b = solve_fleishman(&MomentSpec::new(0.0, 1.0, 2.0, 8.0)).unwrap();
        for &t in &[-0.3, 0.0, 0.5, 0.95] {
            let r = intermediate_correlation(&a, &b, t).unwrap();
            assert!((transformed_correlation(&a, &b, r) - t).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_transforms_keep_correlation() {
        let id = FleishmanCoeffs::IDENTITY;
        let r = intermediate_correlation(&id, &id, 0.4).unwrap();
        assert!((r - 0.4).abs() < 1e-12);
    }

    #[test]
    fn correlation_one_or_more_rejected() {
        let s = MomentSpec::new(0.0, 1.0, 0.0, 0.0);
        assert!(matches!(
            PairGenerator::new(s, s, 1.0),
            Err(Error::IntermediateCorrelationOutOfRange(_))
        ));
    }

    #[test]
    fn independent_pairs_are_uncorrelated() {
        let sx = MomentSpec::new(2.0, 3.0, 1.1, 1.2);
        let sy = MomentSpec::new(3.5, 10.0, 1.2, 1.4);
        let n = 1_000_000;
        let (x, y) = vale_maurelli_pair(&sx, &sy, 0.0, n, &mut stream(11, &[])).unwrap();
        let mx = x.iter().sum::<f64>() / n as f64;
        let my = y.iter().sum::<f64>() / n as f64;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (a, b) in x.iter().zip(&y) {
            sxy += (a - mx) * (b - my);
            sxx += (a - mx) * (a - mx);
            syy += (b - my) * (b - my);
        }
        let corr = sxy / (sxx * syy).sqrt();
        // SE of a zero correlation is 1/sqrt(n)
        assert!(corr.abs() < 3.0 / (n as f64).sqrt(), "corr {corr}");
    }
}
