use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Target marginal moments. Kurtosis uses the excess convention (normal = 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSpec {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

impl MomentSpec {
    pub fn new(mean: f64, variance: f64, skewness: f64, kurtosis: f64) -> Self {
        Self {
            mean,
            variance,
            skewness,
            kurtosis,
        }
    }

    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.variance > 0.0) || !self.variance.is_finite() {
            return Err(Error::Invalid(format!(
                "variance must be positive, got {}",
                self.variance
            )));
        }
        if self.skewness * self.skewness > self.kurtosis + 2.0 {
            return Err(Error::InfeasibleMoments {
                skew: self.skewness,
                kurtosis: self.kurtosis,
            });
        }
        Ok(())
    }
}

/// Coefficients of the power transform `a + bZ + cZ² + dZ³`, with `a = -c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FleishmanCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl FleishmanCoeffs {
    pub const IDENTITY: Self = Self {
        a: 0.0,
        b: 1.0,
        c: 0.0,
        d: 0.0,
    };

    #[inline]
    pub fn apply(&self, z: f64) -> f64 {
        self.a + z * (self.b + z * (self.c + z * self.d))
    }

    /// Variance, skewness and excess kurtosis of the transformed standard normal.
    pub fn moments(&self) -> [f64; 3] {
        let r = residuals(self.b, self.c, self.d, 0.0, 0.0);
        [r[0] + 1.0, r[1], r[2]]
    }
}

// Residuals of (variance - 1, skew - g1, kurt - g2).
fn residuals(b: f64, c: f64, d: f64, g1: f64, g2: f64) -> [f64; 3] {
    let var = b * b + 6.0 * b * d + 2.0 * c * c + 15.0 * d * d;
    let skew = 2.0 * c * (b * b + 24.0 * b * d + 105.0 * d * d + 2.0);
    let kurt = 24.0
        * (b * d
            + c * c * (1.0 + b * b + 28.0 * b * d)
            + d * d * (12.0 + 48.0 * b * d + 141.0 * c * c + 225.0 * d * d));
    [var - 1.0, skew - g1, kurt - g2]
}

fn jacobian(b: f64, c: f64, d: f64) -> [[f64; 3]; 3] {
    let dvar = [2.0 * b + 6.0 * d, 4.0 * c, 6.0 * b + 30.0 * d];
    let s = b * b + 24.0 * b * d + 105.0 * d * d + 2.0;
    let dskew = [
        2.0 * c * (2.0 * b + 24.0 * d),
        2.0 * s,
        2.0 * c * (24.0 * b + 210.0 * d),
    ];
    let dkurt = [
        24.0 * (d + c * c * (2.0 * b + 28.0 * d) + d * d * 48.0 * d),
        24.0 * (2.0 * c * (1.0 + b * b + 28.0 * b * d) + d * d * 282.0 * c),
        24.0 * (b
            + c * c * 28.0 * b
            + 2.0 * d * (12.0 + 48.0 * b * d + 141.0 * c * c + 225.0 * d * d)
            + d * d * (48.0 * b + 450.0 * d)),
    ];
    [dvar, dskew, dkurt]
}

fn solve3(m: [[f64; 3]; 3], r: [f64; 3]) -> Option<[f64; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if det.abs() < 1e-300 || !det.is_finite() {
        return None;
    }
    let mut out = [0.0; 3];
    for (k, slot) in out.iter_mut().enumerate() {
        let mut mk = m;
        for row in 0..3 {
            mk[row][k] = r[row];
        }
        let dk = mk[0][0] * (mk[1][1] * mk[2][2] - mk[1][2] * mk[2][1])
            - mk[0][1] * (mk[1][0] * mk[2][2] - mk[1][2] * mk[2][0])
            + mk[0][2] * (mk[1][0] * mk[2][1] - mk[1][1] * mk[2][0]);
        *slot = dk / det;
    }
    Some(out)
}

const MAX_ITER: usize = 200;
const TOL: f64 = 1e-13;

fn newton(start: [f64; 3], g1: f64, g2: f64) -> Option<[f64; 3]> {
    let [mut b, mut c, mut d] = start;
    for _ in 0..MAX_ITER {
        let r = residuals(b, c, d, g1, g2);
        let norm = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        if norm < TOL {
            return Some([b, c, d]);
        }
        let step = solve3(jacobian(b, c, d), r)?;
        // damped step: halve until the residual decreases
        let mut t = 1.0;
        loop {
            let (nb, nc, nd) = (b - t * step[0], c - t * step[1], d - t * step[2]);
            let nr = residuals(nb, nc, nd, g1, g2);
            let nnorm = (nr[0] * nr[0] + nr[1] * nr[1] + nr[2] * nr[2]).sqrt();
            if nnorm < norm || t < 1e-6 {
                b = nb;
                c = nc;
                d = nd;
                break;
            }
            t *= 0.5;
        }
        if !(b.is_finite() && c.is_finite() && d.is_finite()) {
            return None;
        }
    }
    let r = residuals(b, c, d, g1, g2);
    ((r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt() < 1e-9).then_some([b, c, d])
}

/// Solves for the power-method coefficients that turn a standard normal into a
/// variate with the standardized skewness and excess kurtosis of `spec`.
///
/// Among multiple roots the one with `b > 0` and the smallest `|d|` is kept.
pub fn solve_fleishman(spec: &MomentSpec) -> Result<FleishmanCoeffs> {
    spec.validate()?;
    let (g1, g2) = (spec.skewness, spec.kurtosis);
    if g1 == 0.0 && g2 == 0.0 {
        return Ok(FleishmanCoeffs::IDENTITY);
    }
    let starts = [
        [1.0, 0.0, 0.0],
        [0.9, g1 / 6.0, 0.0],
        [0.95, g1 / 8.0, g2 / 100.0],
        [0.8, g1 / 4.0, 0.05],
        [0.7, g1 / 5.0, 0.1],
        [1.1, g1 / 10.0, -0.05],
        [0.5, g1 / 3.0, 0.15],
    ];
    let best = starts
        .iter()
        .filter_map(|s| newton(*s, g1, g2))
        .filter(|s| s[0] > 0.0)
        .min_by(|x, y| x[2].abs().total_cmp(&y[2].abs()));
    match best {
        Some([b, c, d]) => Ok(FleishmanCoeffs { a: -c, b, c, d }),
        None => Err(Error::NoConvergence {
            what: "power-method coefficient solve",
            iterations: MAX_ITER,
        }),
    }
}
