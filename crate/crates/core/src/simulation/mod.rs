//! Monte Carlo harness: per-replicate draws of B and A, the estimator
//! battery, and RB/RRMSE aggregation.

mod aggregate;
mod config;
mod report;

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::bigdata::{draw_big_dataset, selection_probabilities, BigDataset};
use crate::design::{
    bethel_chromy_allocate, build_design_frame, draw_stratified_sample, stratify, Allocation, AllocationOptions,
    ConstraintSpec, DesignKind, Stratum, WeightedSample,
};
use crate::error::{Error, Result};
use crate::estimators::{evaluate_roster, BatteryOptions, EstimatorId, EstimatorOutput, ReplicateInputs};
use crate::population::PopulationFrame;
use crate::rng::replicate_stream;

pub use aggregate::{aggregate, rb_rrmse, SampleSizeRow, ScenarioResult, SummaryRow, VARIABLE_NAMES};
pub use config::{
    apply_overrides, ConstraintEntry, Missingness, PopulationSource, Scale, ScenarioConfig, ScenarioSpec, Scenarios,
    SynthesizeSpec,
};
pub use report::{
    format_scaled, read_results_csv, read_sizes_csv, render_markdown, write_output, write_results_csv, write_sizes_csv, Format,
    RESULTS_HEADER, SIZES_HEADER,
};

/// One replicate's outcome: estimates (or the failure message) in roster
/// order, plus realized sample sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutput {
    pub index: u64,
    pub estimates: Vec<(EstimatorId, std::result::Result<EstimatorOutput, String>)>,
    pub sample_sizes: BTreeMap<DesignKind, usize>,
    pub n_b: usize,
}

/// Scenario state shared by all replicates.
pub struct PreparedScenario<'a> {
    pub frame: &'a PopulationFrame,
    pub spec: ScenarioSpec,
    pub seed: u64,
    pub roster: Vec<EstimatorId>,
    pub designs: Vec<DesignKind>,
    pub pi: Vec<f64>,
    pub constraints: Vec<ConstraintSpec>,
    pub allocation_options: AllocationOptions,
    pub battery: BatteryOptions,
    /// Allocations for designs whose frame does not depend on B.
    pub fixed: BTreeMap<DesignKind, (Vec<Stratum>, Allocation)>,
}

/// Strata and allocation for one design frame.
pub fn allocate_design(
    frame: &PopulationFrame,
    big: Option<&BigDataset>,
    design: DesignKind,
    constraints: &[ConstraintSpec],
    opts: &AllocationOptions,
) -> Result<(Vec<Stratum>, Allocation)> {
    let df = build_design_frame(frame, big, design);
    let strata = stratify(frame, &df.sampling);
    let alloc = bethel_chromy_allocate(&strata, constraints, opts)?;
    Ok((strata, alloc))
}

impl<'a> PreparedScenario<'a> {
    pub fn new(frame: &'a PopulationFrame, config: &ScenarioConfig, spec: ScenarioSpec) -> Result<Self> {
        let model = config.selection_model(&spec);
        let pi = selection_probabilities(frame, &model)?;
        let constraints = config.constraint_specs()?;
        let allocation_options = AllocationOptions {
            min_n: config.min_stratum_n,
            ..AllocationOptions::default()
        };
        let mut fixed = BTreeMap::new();
        for &d in &config.designs {
            if !d.depends_on_big_data() {
                fixed.insert(d, allocate_design(frame, None, d, &constraints, &allocation_options)?);
            }
        }
        Ok(Self {
            frame,
            spec,
            seed: config.seed,
            roster: config.estimators.clone(),
            designs: config.designs.clone(),
            pi,
            constraints,
            allocation_options,
            battery: BatteryOptions {
                dr_variant: config.dr_variant,
                mi_calibrated_weights: config.mi_calibrated_weights,
                ..BatteryOptions::default()
            },
            fixed,
        })
    }

    fn stream(&self, replicate: u64, label: &str) -> crate::rng::Rng {
        replicate_stream(self.seed, replicate, &format!("{}/{label}", self.spec.name()))
    }

    /// Draws B, then each design's sample, links them and runs the roster.
    /// Estimator failures are recorded and do not stop the replicate.
    pub fn run_replicate(&self, index: u64) -> Result<ReplicateOutput> {
        let big = draw_big_dataset(&self.pi, self.spec.measurement_error, &mut self.stream(index, "big_data"))?;
        let mut samples = BTreeMap::new();
        let mut sample_errors = BTreeMap::new();
        let mut sample_sizes = BTreeMap::new();
        for &d in &self.designs {
            let drawn = match self.fixed.get(&d) {
                Some((strata, alloc)) => draw_linked(strata, alloc, &big, &mut self.stream(index, d.name())),
                None => allocate_design(self.frame, Some(&big), d, &self.constraints, &self.allocation_options)
                    .and_then(|(strata, alloc)| draw_linked(&strata, &alloc, &big, &mut self.stream(index, d.name()))),
            };
            match drawn {
                Ok(s) => {
                    sample_sizes.insert(d, s.len());
                    samples.insert(d, s);
                }
                Err(e) => {
                    sample_errors.insert(d, e.to_string());
                }
            }
        }
        let mut inputs = ReplicateInputs {
            frame: self.frame,
            big: &big,
            samples,
            hot_deck_rng: self.stream(index, "hot_deck"),
        };
        let estimates = evaluate_roster(&mut inputs, &self.roster, &self.battery)
            .into_iter()
            .map(|(id, r)| {
                let r = match id.design().and_then(|d| sample_errors.get(&d)) {
                    Some(msg) => Err(format!("{} sample unavailable: {msg}", id.design().unwrap().name())),
                    None => r.map_err(|e| e.to_string()),
                };
                (id, r)
            })
            .collect();
        Ok(ReplicateOutput {
            index,
            estimates,
            sample_sizes,
            n_b: big.n_b(),
        })
    }

    /// Runs replicates `0..r` in parallel; output is ordered by replicate.
    pub fn run(&self, replicates: usize) -> Result<Vec<ReplicateOutput>> {
        (0..replicates as u64).into_par_iter().map(|i| self.run_replicate(i)).collect()
    }
}

fn draw_linked(
    strata: &[Stratum],
    alloc: &Allocation,
    big: &BigDataset,
    rng: &mut crate::rng::Rng,
) -> Result<WeightedSample> {
    let mut s = draw_stratified_sample(strata, alloc, rng)?;
    s.link(|i| big.contains(i));
    Ok(s)
}

/// Runs every scenario in the config on a prepared frame, optionally on a
/// dedicated pool of `threads` workers.
pub fn run_config(frame: &PopulationFrame, config: &ScenarioConfig, threads: Option<usize>) -> Result<Vec<ScenarioResult>> {
    let body = || -> Result<Vec<ScenarioResult>> {
        config
            .scenario
            .specs()
            .into_iter()
            .map(|spec| {
                let prepared = PreparedScenario::new(frame, config, spec)?;
                let outputs = prepared.run(config.replicates())?;
                aggregate(&spec.name(), frame, &config.designs, &outputs)
            })
            .collect()
    };
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?
            .install(body),
        None => body(),
    }
}
