use std::collections::BTreeMap;

use crate::design::DesignKind;
use crate::error::{Error, Result};
use crate::estimators::EstimatorId;
use crate::population::PopulationFrame;

use super::ReplicateOutput;

pub const VARIABLE_NAMES: [&str; 4] = ["earn", "emp", "ovt", "awe"];

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scenario: String,
    pub design: String,
    pub estimator: String,
    pub variable: String,
    pub rb: f64,
    pub rrmse: f64,
    pub n_replicates: usize,
    pub n_failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSizeRow {
    pub scenario: String,
    pub design: String,
    pub mean_n: f64,
    pub min_n: usize,
    pub max_n: usize,
    pub n_replicates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub scenario: String,
    pub rows: Vec<SummaryRow>,
    pub sample_sizes: Vec<SampleSizeRow>,
    /// Mean of each diagnostic over successful replicates, per estimator.
    pub diagnostics: BTreeMap<String, BTreeMap<String, f64>>,
    /// First failure message per estimator, for reporting.
    pub first_failures: BTreeMap<String, String>,
    pub mean_n_b: f64,
}

impl ScenarioResult {
    pub fn row(&self, estimator: &str, variable: &str) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.estimator == estimator && r.variable == variable)
    }
}

/// `RB = mean((Ŷ − Y) / Y)`, `RRMSE = sqrt(mean((Ŷ − Y)²)) / Y`.
pub fn rb_rrmse(estimates: &[f64], truth: f64) -> Result<(f64, f64)> {
    if truth == 0.0 {
        return Err(Error::ZeroTruth("requested variable"));
    }
    if estimates.is_empty() {
        return Ok((f64::NAN, f64::NAN));
    }
    let r = estimates.len() as f64;
    let rb = estimates.iter().map(|e| (e - truth) / truth).sum::<f64>() / r;
    let mse = estimates.iter().map(|e| (e - truth).powi(2)).sum::<f64>() / r;
    Ok((rb, mse.sqrt() / truth.abs()))
}

/// Summarizes replicate outputs against the frame's true totals. Failed
/// replicates are excluded per estimator and counted.
pub fn aggregate(
    scenario: &str,
    frame: &PopulationFrame,
    designs: &[DesignKind],
    outputs: &[ReplicateOutput],
) -> Result<ScenarioResult> {
    let t = frame.totals();
    if t[1] == 0.0 {
        return Err(Error::ZeroTruth("emp"));
    }
    let truth = [t[0], t[1], t[2], t[0] / t[1]];
    for (k, v) in truth.iter().enumerate() {
        if *v == 0.0 {
            return Err(Error::ZeroTruth(VARIABLE_NAMES[k]));
        }
    }
    let roster: Vec<EstimatorId> = outputs
        .first()
        .map(|o| o.estimates.iter().map(|(id, _)| *id).collect())
        .unwrap_or_default();

    let mut rows = Vec::new();
    let mut diagnostics = BTreeMap::new();
    let mut first_failures = BTreeMap::new();
    for (pos, &id) in roster.iter().enumerate() {
        let mut values: [Vec<f64>; 4] = Default::default();
        let mut failures = 0;
        let mut diag: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for o in outputs {
            match &o.estimates[pos].1 {
                Ok(out) => {
                    for k in 0..3 {
                        values[k].push(out.totals[k]);
                    }
                    values[3].push(out.awe);
                    for (key, v) in &out.diagnostics {
                        let e = diag.entry(key.to_string()).or_insert((0.0, 0));
                        e.0 += v;
                        e.1 += 1;
                    }
                }
                Err(msg) => {
                    failures += 1;
                    first_failures.entry(id.to_string()).or_insert_with(|| msg.clone());
                }
            }
        }
        for k in 0..4 {
            let (rb, rrmse) = rb_rrmse(&values[k], truth[k])?;
            rows.push(SummaryRow {
                scenario: scenario.to_string(),
                design: id.group().to_string(),
                estimator: id.to_string(),
                variable: VARIABLE_NAMES[k].to_string(),
                rb,
                rrmse,
                n_replicates: values[k].len(),
                n_failures: failures,
            });
        }
        if !diag.is_empty() {
            diagnostics.insert(
                id.to_string(),
                diag.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect(),
            );
        }
    }

    let sample_sizes = designs
        .iter()
        .map(|d| {
            let sizes: Vec<usize> = outputs.iter().filter_map(|o| o.sample_sizes.get(d).copied()).collect();
            SampleSizeRow {
                scenario: scenario.to_string(),
                design: d.name().to_string(),
                mean_n: if sizes.is_empty() {
                    f64::NAN
                } else {
                    sizes.iter().sum::<usize>() as f64 / sizes.len() as f64
                },
                min_n: sizes.iter().copied().min().unwrap_or(0),
                max_n: sizes.iter().copied().max().unwrap_or(0),
                n_replicates: sizes.len(),
            }
        })
        .collect();
    let mean_n_b = if outputs.is_empty() {
        f64::NAN
    } else {
        outputs.iter().map(|o| o.n_b as f64).sum::<f64>() / outputs.len() as f64
    };
    Ok(ScenarioResult {
        scenario: scenario.to_string(),
        rows,
        sample_sizes,
        diagnostics,
        first_failures,
        mean_n_b,
    })
}
