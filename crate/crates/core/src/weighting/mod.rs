//! Weighting kernel: calibration, weighted logistic fits, propensity models
//! and the linear measurement-error model.

mod calibration;
mod logistic;
mod me;
mod propensity;

pub use calibration::{chi_square_calibrate, Calibrated, CalibrationProblem};
pub use logistic::{fit_logistic_weighted, log_likelihood, score, LogisticOptions};
pub use me::{fit_me_model, fit_me_model_weighted, MeModel};
pub use propensity::{
    alp_propensities, covariate_row, frame_propensities, kw_propensities, CovariateSpec, PropensityKind,
    PropensityModel,
};
