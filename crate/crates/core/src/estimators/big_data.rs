//! Estimators that read the big dataset: inverse propensity weighting, mass
//! imputation, doubly robust, split population, cut-off and division ratio
//! estimators.

use std::collections::BTreeMap;

use rand::Rng as _;

use crate::bigdata::BigDataset;
use crate::design::WeightedSample;
use crate::error::{Error, Result};
use crate::linalg::{select_columns, varying_columns, weighted_least_squares};
use crate::population::{size_group_of, PopulationFrame, SizeBand, UnitRecord};
use crate::rng::Rng;
use crate::weighting::{chi_square_calibrate, Calibrated, CalibrationProblem};

use super::probability::{greg_total, ht_total};
use super::{Totals, ValueSource};

/// Hájek IPW: `(N / N̂) Σ y / π̂` with `N̂ = Σ 1 / π̂` over `units`.
pub fn hajek_ipw(frame: &PopulationFrame, units: &[usize], pihat: &[f64], n_pop: f64, src: ValueSource) -> Result<Totals> {
    if units.is_empty() {
        return Err(Error::EmptyBigData);
    }
    if pihat.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
        return Err(Error::ZeroPropensity);
    }
    let mut t = [0.0; 3];
    let mut n_hat = 0.0;
    for (&k, &p) in units.iter().zip(pihat) {
        let w = 1.0 / p;
        n_hat += w;
        let v = src.values(frame.unit(k));
        for j in 0..3 {
            t[j] += w * v[j];
        }
    }
    Ok(t.map(|v| n_pop / n_hat * v))
}

fn regression_row(u: &UnitRecord) -> Vec<f64> {
    let mut row = vec![0.0; 19];
    row[0] = 1.0;
    row[1] = u.x();
    if u.industry > 0 {
        row[1 + u.industry as usize] = 1.0;
    }
    row
}

/// Linear predictor on `(1, frame employment, industry dummies)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub columns: Vec<usize>,
    pub beta: Vec<f64>,
}

impl LinearModel {
    pub fn predict(&self, u: &UnitRecord) -> f64 {
        let row = regression_row(u);
        self.columns.iter().zip(&self.beta).map(|(&c, b)| row[c] * b).sum()
    }
}

/// One imputation model per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct MiModels(pub [LinearModel; 3]);

impl MiModels {
    /// Weighted least squares over `units` with the given case weights.
    pub fn fit(frame: &PopulationFrame, units: &[usize], weights: &[f64], src: ValueSource) -> Result<Self> {
        if units.is_empty() {
            return Err(Error::EmptyBigData);
        }
        let rows: Vec<Vec<f64>> = units.iter().map(|&k| regression_row(frame.unit(k))).collect();
        let columns = varying_columns(&rows, weights);
        let x = select_columns(&rows, &columns);
        let values: Vec<Totals> = units.iter().map(|&k| src.values(frame.unit(k))).collect();
        let fit = |j: usize| -> Result<LinearModel> {
            let y: Vec<f64> = values.iter().map(|v| v[j]).collect();
            Ok(LinearModel {
                columns: columns.clone(),
                beta: weighted_least_squares(&x, &y, weights)?,
            })
        };
        Ok(MiModels([fit(0)?, fit(1)?, fit(2)?]))
    }

    pub fn predict(&self, u: &UnitRecord) -> Totals {
        [0, 1, 2].map(|j| self.0[j].predict(u))
    }

    /// Mass imputation total `Σ_A w ŷ`.
    pub fn impute_total(&self, frame: &PopulationFrame, sample: &WeightedSample, weights: &[f64]) -> Totals {
        let mut t = [0.0; 3];
        for (&i, &w) in sample.units.iter().zip(weights) {
            let p = self.predict(frame.unit(i));
            for j in 0..3 {
                t[j] += w * p[j];
            }
        }
        t
    }
}

/// Hot-deck mass imputation: each unit of A takes all values of one donor
/// drawn uniformly from B within industry × size band, falling back to the
/// size band and then to all of B.
pub fn hot_deck_total(
    frame: &PopulationFrame,
    sample: &WeightedSample,
    weights: &[f64],
    big: &BigDataset,
    src: ValueSource,
    rng: &mut Rng,
) -> Result<Totals> {
    if big.is_empty() {
        return Err(Error::EmptyDonorClass);
    }
    let mut by_group: BTreeMap<(u8, u8), Vec<usize>> = BTreeMap::new();
    let mut by_cell: BTreeMap<(u8, SizeBand), Vec<usize>> = BTreeMap::new();
    let mut by_band: BTreeMap<SizeBand, Vec<usize>> = BTreeMap::new();
    for &k in big.members() {
        let u = frame.unit(k);
        by_group.entry((u.industry, size_group_of(u.frame_employment))).or_default().push(k);
        by_cell.entry((u.industry, u.size_band())).or_default().push(k);
        by_band.entry(u.size_band()).or_default().push(k);
    }
    let mut t = [0.0; 3];
    for (&i, &w) in sample.units.iter().zip(weights) {
        let u = frame.unit(i);
        let donors = by_group
            .get(&(u.industry, size_group_of(u.frame_employment)))
            .or_else(|| by_cell.get(&(u.industry, u.size_band())))
            .or_else(|| by_band.get(&u.size_band()))
            .map_or(big.members(), Vec::as_slice);
        let donor = donors[rng.random_range(0..donors.len())];
        let v = src.values(frame.unit(donor));
        for j in 0..3 {
            t[j] += w * v[j];
        }
    }
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DrVariant {
    /// Both parts normalized by the known population size.
    Dr1,
    /// Each part normalized by its own estimated size.
    #[default]
    Dr2,
}

/// Doubly robust total from propensities on B and predictions on A and B.
pub fn dr_total(
    frame: &PopulationFrame,
    sample: &WeightedSample,
    big: &BigDataset,
    pihat: &[f64],
    predict: &dyn Fn(&UnitRecord) -> Totals,
    src: ValueSource,
    variant: DrVariant,
) -> Result<Totals> {
    if big.is_empty() {
        return Err(Error::EmptyBigData);
    }
    if pihat.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
        return Err(Error::ZeroPropensity);
    }
    let n = frame.n() as f64;
    let (mut resid, mut n_b) = ([0.0; 3], 0.0);
    for (&k, &p) in big.members().iter().zip(pihat) {
        let u = frame.unit(k);
        let (y, yh) = (src.values(u), predict(u));
        n_b += 1.0 / p;
        for j in 0..3 {
            resid[j] += (y[j] - yh[j]) / p;
        }
    }
    let (mut pred, mut n_a) = ([0.0; 3], 0.0);
    for (&i, &d) in sample.units.iter().zip(&sample.weights) {
        let yh = predict(frame.unit(i));
        n_a += d;
        for j in 0..3 {
            pred[j] += d * yh[j];
        }
    }
    Ok(match variant {
        DrVariant::Dr1 => [0, 1, 2].map(|j| resid[j] + pred[j]),
        DrVariant::Dr2 => [0, 1, 2].map(|j| n * (resid[j] / n_b + pred[j] / n_a)),
    })
}

/// Split population: the big-data total plus an estimate for `C = U \ B`
/// from a sample of C, plain HT or calibrated to `(N_C, X_C)`.
pub fn split_population_total(
    frame: &PopulationFrame,
    big: &BigDataset,
    sample_c: &WeightedSample,
    calibrated: bool,
    src: ValueSource,
) -> Result<(Totals, Option<Calibrated>)> {
    let mut y_b = [0.0; 3];
    let mut x_b = 0.0;
    for &k in big.members() {
        let u = frame.unit(k);
        x_b += u.x();
        let v = src.values(u);
        for j in 0..3 {
            y_b[j] += v[j];
        }
    }
    if sample_c.is_empty() {
        return Ok((y_b, None));
    }
    let (y_c, cal) = if calibrated {
        let n_c = (frame.n() - big.n_b()) as f64;
        let x_c = frame.frame_employment_total() - x_b;
        let (t, c) = greg_total(frame, sample_c, [n_c, x_c])?;
        (t, Some(c))
    } else {
        (ht_total(frame, sample_c), None)
    };
    Ok(([0, 1, 2].map(|j| y_b[j] + y_c[j]), cal))
}

fn take_none_members(frame: &PopulationFrame, big: &BigDataset) -> Vec<(usize, usize)> {
    big.members()
        .iter()
        .enumerate()
        .filter(|(_, &k)| frame.unit(k).size_band() == SizeBand::Micro)
        .map(|(pos, &k)| (pos, k))
        .collect()
}

/// Cut-off with the take-none stratum filled by the big-data total:
/// `HT(A) + Σ_{B ∩ U_E} y`.
pub fn co_bd_total(frame: &PopulationFrame, sample: &WeightedSample, big: &BigDataset, src: ValueSource) -> Totals {
    let mut t = ht_total(frame, sample);
    for (_, k) in take_none_members(frame, big) {
        let v = src.values(frame.unit(k));
        for j in 0..3 {
            t[j] += v[j];
        }
    }
    t
}

/// Cut-off with A calibrated to the take-some frame and the take-none
/// stratum estimated by Hájek IPW over `B ∩ U_E` with frame-model
/// propensities (`pihat` aligned with `big.members()`). Returns whether the
/// take-none contribution was empty.
pub fn co_cal_kwfr_total(
    frame: &PopulationFrame,
    sample: &WeightedSample,
    big: &BigDataset,
    pihat: &[f64],
    src: ValueSource,
) -> Result<(Totals, Calibrated, bool)> {
    let (mut n_s, mut x_s, mut n_e) = (0.0, 0.0, 0.0);
    for u in frame.units() {
        if u.size_band() == SizeBand::Micro {
            n_e += 1.0;
        } else {
            n_s += 1.0;
            x_s += u.x();
        }
    }
    let (mut t, cal) = greg_total(frame, sample, [n_s, x_s])?;
    let take_none = take_none_members(frame, big);
    let empty = take_none.is_empty();
    if !empty {
        let units: Vec<usize> = take_none.iter().map(|&(_, k)| k).collect();
        let p: Vec<f64> = take_none.iter().map(|&(pos, _)| pihat[pos]).collect();
        let e = hajek_ipw(frame, &units, &p, n_e, src)?;
        for j in 0..3 {
            t[j] += e[j];
        }
    }
    Ok((t, cal, empty))
}

/// Division-wise ratio adjustment on frame employment:
/// `Σ_d (X_d / X_{B,d}) Σ_{B ∩ d} y`. Returns the number of divisions with
/// frame units but no B members.
pub fn auxdiv_total(frame: &PopulationFrame, big: &BigDataset, src: ValueSource) -> Result<(Totals, usize)> {
    if big.is_empty() {
        return Err(Error::EmptyBigData);
    }
    let mut x_d = [0.0; 18];
    let mut present = [false; 18];
    for u in frame.units() {
        x_d[u.industry as usize] += u.x();
        present[u.industry as usize] = true;
    }
    let mut x_b = [0.0; 18];
    let mut y_b = [[0.0; 3]; 18];
    let mut in_b = [false; 18];
    for &k in big.members() {
        let u = frame.unit(k);
        let d = u.industry as usize;
        in_b[d] = true;
        x_b[d] += u.x();
        let v = src.values(u);
        for j in 0..3 {
            y_b[d][j] += v[j];
        }
    }
    let mut t = [0.0; 3];
    let mut missing = 0;
    for d in 0..18 {
        if !in_b[d] {
            missing += usize::from(present[d]);
            continue;
        }
        if !(x_b[d] > 0.0) {
            return Err(Error::ZeroDenominator("big-data frame employment in a division"));
        }
        let f = x_d[d] / x_b[d];
        for j in 0..3 {
            t[j] += f * y_b[d][j];
        }
    }
    Ok((t, missing))
}

/// Hájek IPW over all of B with frame-model propensities.
pub fn kwfr_total(frame: &PopulationFrame, big: &BigDataset, pihat: &[f64], src: ValueSource) -> Result<Totals> {
    hajek_ipw(frame, big.members(), pihat, frame.n() as f64, src)
}

/// Calibrates `1/π̂` over B to `(N, X)` on `(1, frame employment)`.
pub fn calibrate_big_data(frame: &PopulationFrame, big: &BigDataset, pihat: &[f64]) -> Result<Calibrated> {
    if big.is_empty() {
        return Err(Error::EmptyBigData);
    }
    if pihat.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
        return Err(Error::ZeroPropensity);
    }
    let d: Vec<f64> = pihat.iter().map(|p| 1.0 / p).collect();
    let mut x = crate::linalg::Design::with_capacity(2, big.n_b());
    for &k in big.members() {
        x.push(&[1.0, frame.unit(k).x()]);
    }
    chi_square_calibrate(&CalibrationProblem {
        d: &d,
        x: &x,
        totals: &[frame.n() as f64, frame.frame_employment_total()],
        q: None,
    })
}

/// Σ_B w y with the given weights.
pub fn big_data_weighted_total(frame: &PopulationFrame, big: &BigDataset, weights: &[f64], src: ValueSource) -> Totals {
    let mut t = [0.0; 3];
    for (&k, &w) in big.members().iter().zip(weights) {
        let v = src.values(frame.unit(k));
        for j in 0..3 {
            t[j] += w * v[j];
        }
    }
    t
}
