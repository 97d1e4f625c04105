use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("moments (skew {skew}, kurtosis {kurtosis}) are outside the power-method region")]
    InfeasibleMoments { skew: f64, kurtosis: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("intermediate correlation {0} is outside [-1, 1]")]
    IntermediateCorrelationOutOfRange(f64),

    #[error("invalid configuration: {key}: {message}")]
    Config { key: String, message: String },

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("duplicate unit_id {0}")]
    DuplicateUnit(u64),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("non-positive earnings for unit {0} under an outcome-dependent selection model")]
    NonPositiveEarnings(u64),

    #[error("allocation constraints infeasible: {0}")]
    InfeasibleConstraints(String),

    #[error("singular system: dimension {dimension} is linearly dependent on earlier columns")]
    Singular { dimension: usize },

    #[error("complete or quasi-complete separation detected")]
    Separation,

    #[error("zero or negative propensity for a big-data unit")]
    ZeroPropensity,

    #[error("overlap too small for measurement error fit: {0} units")]
    OverlapTooSmall(usize),

    #[error("degenerate measurement error fit (slope {0})")]
    DegenerateFit(f64),

    #[error("empty donor class for hot-deck imputation")]
    EmptyDonorClass,

    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),

    #[error("zero truth for variable {0}")]
    ZeroTruth(&'static str),

    #[error("empty big dataset")]
    EmptyBigData,

    #[error("{what} failed: {message}")]
    Dependency { what: &'static str, message: String },

    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Configuration and input-schema problems, as opposed to numerical or
    /// runtime failures.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config { .. }
                | Error::Schema(_)
                | Error::Parse { .. }
                | Error::DuplicateUnit(_)
                | Error::Io { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
