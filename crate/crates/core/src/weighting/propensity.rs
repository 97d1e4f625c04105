use crate::bigdata::{inverse_logit, BigDataset};
use crate::design::WeightedSample;
use crate::error::{Error, Result};
use crate::linalg::{select_columns, varying_columns};
use crate::population::{PopulationFrame, UnitRecord};

use super::logistic::{fit_logistic_weighted, LogisticOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropensityKind {
    Kw,
    Alp,
    Frame,
}

/// Propensity covariates: intercept, frame employment and industry dummies
/// against division B, optionally log earnings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CovariateSpec {
    pub log_earnings: bool,
}

impl CovariateSpec {
    pub fn width(self) -> usize {
        2 + 17 + usize::from(self.log_earnings)
    }
}

pub fn covariate_row(unit: &UnitRecord, spec: CovariateSpec, earnings: f64) -> Vec<f64> {
    let mut row = vec![0.0; spec.width()];
    row[0] = 1.0;
    row[1] = unit.x();
    if unit.industry > 0 {
        row[1 + unit.industry as usize] = 1.0;
    }
    if spec.log_earnings {
        row[19] = earnings.max(1.0).ln();
    }
    row
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropensityModel {
    pub kind: PropensityKind,
    pub spec: CovariateSpec,
    /// Indices into the full covariate row that entered the fit; columns
    /// constant on the fitting data are dropped.
    pub columns: Vec<usize>,
    pub beta: Vec<f64>,
}

impl PropensityModel {
    pub fn linear_predictor(&self, unit: &UnitRecord, earnings: f64) -> f64 {
        let row = covariate_row(unit, self.spec, earnings);
        self.columns.iter().zip(&self.beta).map(|(&c, b)| row[c] * b).sum()
    }

    /// π̂ for one unit: the logistic probability, or the fitted odds for ALP.
    pub fn predict(&self, unit: &UnitRecord, earnings: f64) -> f64 {
        let eta = self.linear_predictor(unit, earnings);
        match self.kind {
            PropensityKind::Alp => eta.exp(),
            PropensityKind::Kw | PropensityKind::Frame => inverse_logit(eta),
        }
    }

    /// π̂ on the members of B, using B's observed earnings.
    pub fn predict_members(&self, frame: &PopulationFrame, big: &BigDataset) -> Vec<f64> {
        big.members()
            .iter()
            .map(|&k| {
                let u = frame.unit(k);
                self.predict(u, u.observed(crate::Variable::Earn, big.use_starred))
            })
            .collect()
    }
}

fn fit(
    kind: PropensityKind,
    spec: CovariateSpec,
    rows: Vec<Vec<f64>>,
    delta: &[bool],
    w: &[f64],
    opts: &LogisticOptions,
) -> Result<PropensityModel> {
    let columns = varying_columns(&rows, w);
    let x = select_columns(&rows, &columns);
    let beta = fit_logistic_weighted(delta, &x, w, opts)?;
    Ok(PropensityModel {
        kind,
        spec,
        columns,
        beta,
    })
}

/// Kim–Wang propensities: logistic fit of the linkage indicator over the
/// probability sample with design weights as case weights.
pub fn kw_propensities(
    frame: &PopulationFrame,
    sample: &WeightedSample,
    spec: CovariateSpec,
    opts: &LogisticOptions,
) -> Result<PropensityModel> {
    let rows = sample
        .units
        .iter()
        .map(|&i| {
            let u = frame.unit(i);
            covariate_row(u, spec, u.earnings)
        })
        .collect();
    fit(PropensityKind::Kw, spec, rows, &sample.delta, &sample.weights, opts)
}

/// Adjusted logistic propensities: B (weight 1) stacked on A (design
/// weights), membership of the B block as response, fitted odds as π̂.
pub fn alp_propensities(
    frame: &PopulationFrame,
    sample: &WeightedSample,
    big: &BigDataset,
    spec: CovariateSpec,
    opts: &LogisticOptions,
) -> Result<PropensityModel> {
    let n = big.n_b() + sample.len();
    let mut rows = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for &k in big.members() {
        let u = frame.unit(k);
        rows.push(covariate_row(u, spec, u.observed(crate::Variable::Earn, big.use_starred)));
        z.push(true);
        w.push(1.0);
    }
    for (&i, &d) in sample.units.iter().zip(&sample.weights) {
        let u = frame.unit(i);
        rows.push(covariate_row(u, spec, u.earnings));
        z.push(false);
        w.push(d);
    }
    fit(PropensityKind::Alp, spec, rows, &z, &w, opts)
}

/// Unweighted logistic fit of B membership over the whole frame. Only frame
/// covariates are available, so log earnings cannot be requested.
pub fn frame_propensities(
    frame: &PopulationFrame,
    big: &BigDataset,
    spec: CovariateSpec,
    opts: &LogisticOptions,
) -> Result<PropensityModel> {
    if spec.log_earnings {
        return Err(Error::Invalid("frame propensities use frame covariates only".into()));
    }
    let rows = frame.units().iter().map(|u| covariate_row(u, spec, 0.0)).collect();
    let w = vec![1.0; frame.n()];
    fit(PropensityKind::Frame, spec, rows, big.delta(), &w, opts)
}
