//! Estimators that weight the reference sample alone.

use crate::bigdata::BigDataset;
use crate::design::WeightedSample;
use crate::error::Result;
use crate::linalg::{weighted_least_squares, Design};
use crate::population::{PopulationFrame, Variable};
use crate::weighting::{chi_square_calibrate, Calibrated, CalibrationProblem};

use super::Totals;

/// Σ w y over the sample with its current weights, true values.
pub fn weighted_totals(frame: &PopulationFrame, sample: &WeightedSample, weights: &[f64]) -> Totals {
    let mut t = [0.0; 3];
    for (&i, &w) in sample.units.iter().zip(weights) {
        let v = frame.unit(i).values();
        for k in 0..3 {
            t[k] += w * v[k];
        }
    }
    t
}

pub fn ht_total(frame: &PopulationFrame, sample: &WeightedSample) -> Totals {
    weighted_totals(frame, sample, &sample.weights)
}

fn intercept_x(frame: &PopulationFrame, sample: &WeightedSample) -> Design {
    let mut x = Design::with_capacity(2, sample.len());
    for &i in &sample.units {
        x.push(&[1.0, frame.unit(i).x()]);
    }
    x
}

/// Design weights calibrated to `(N, X)` on `(1, frame employment)`.
pub fn greg_total(frame: &PopulationFrame, sample: &WeightedSample, benchmarks: [f64; 2]) -> Result<(Totals, Calibrated)> {
    let x = intercept_x(frame, sample);
    let cal = chi_square_calibrate(&CalibrationProblem {
        d: &sample.weights,
        x: &x,
        totals: &benchmarks,
        q: None,
    })?;
    Ok((weighted_totals(frame, sample, &cal.weights), cal))
}

/// Design weights calibrated to `(N, N_B, Y_B,earn)` on `(1, δ, δ·y_earn)`,
/// with B's reported earnings on both sides. With an empty B only `N` is
/// used.
pub fn rdi_total(frame: &PopulationFrame, sample: &WeightedSample, big: &BigDataset) -> Result<(Totals, Calibrated)> {
    let earn = |i: usize| frame.unit(i).observed(Variable::Earn, big.use_starred);
    let (x, benchmarks) = if big.is_empty() {
        let mut x = Design::with_capacity(1, sample.len());
        for _ in &sample.units {
            x.push(&[1.0]);
        }
        (x, vec![frame.n() as f64])
    } else {
        let mut x = Design::with_capacity(3, sample.len());
        for (&i, &d) in sample.units.iter().zip(&sample.delta) {
            let di = f64::from(u8::from(d));
            x.push(&[1.0, di, di * earn(i)]);
        }
        let y_b: f64 = big.members().iter().map(|&k| earn(k)).sum();
        (x, vec![frame.n() as f64, big.n_b() as f64, y_b])
    };
    let cal = chi_square_calibrate(&CalibrationProblem {
        d: &sample.weights,
        x: &x,
        totals: &benchmarks,
        q: None,
    })?;
    Ok((weighted_totals(frame, sample, &cal.weights), cal))
}

/// Difference-form model-assisted estimator: predictions summed over B plus
/// the design-weighted residual correction from A,
/// `Σ_B ŷ + Σ_A d (y − δ ŷ)`, with ŷ from a design-weighted fit on
/// `(1, frame employment)`.
pub fn qr_ma_total(frame: &PopulationFrame, sample: &WeightedSample, big: &BigDataset) -> Result<Totals> {
    let x = intercept_x(frame, sample);
    let mut out = [0.0; 3];
    for var in Variable::ALL {
        let y: Vec<f64> = sample.units.iter().map(|&i| frame.unit(i).value(var)).collect();
        let beta = weighted_least_squares(&x, &y, &sample.weights)?;
        let pred = |i: usize| beta[0] + beta[1] * frame.unit(i).x();
        let on_b: f64 = big.members().iter().map(|&k| pred(k)).sum();
        let correction: f64 = sample
            .units
            .iter()
            .zip(&sample.weights)
            .zip(&sample.delta)
            .zip(&y)
            .map(|(((&i, &d), &delta), &yi)| d * (yi - if delta { pred(i) } else { 0.0 }))
            .sum();
        out[var.index()] = on_b + correction;
    }
    Ok(out)
}
