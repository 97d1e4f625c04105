//! Estimation of business survey totals from a large non-probability dataset
//! combined with a reference probability sample.
//!
//! The crate covers the full simulation pipeline:
//!
//! * [`population`]: synthetic business register with true and mis-measured values
//! * [`bigdata`]: logistic two-stage selection of the big dataset
//! * [`design`]: stratification, Bethel–Chromy allocation, stratified SRSWOR
//! * [`weighting`]: calibration, weighted logistic fits, propensities, measurement-error models
//! * [`estimators`]: the estimator battery (GREG, RDI, KW family, mass imputation, DR, split population, cut-off)
//! * [`simulation`]: scenario runner, RB/RRMSE aggregation and reporting

pub mod bigdata;
pub mod cli;
pub mod design;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod population;
pub mod rng;
pub mod simulation;
pub mod weighting;

pub use error::{Error, Result};
pub use population::{PopulationConfig, PopulationFrame, UnitRecord, Variable};
