//! Total estimators for earnings, employment and overtime, plus the AWE
//! ratio.

mod battery;
mod big_data;
mod probability;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::design::DesignKind;
use crate::error::{Error, Result};
use crate::population::{UnitRecord, Variable};
use crate::weighting::MeModel;

pub use battery::{evaluate_roster, BatteryOptions, ReplicateInputs};
pub use big_data::{
    auxdiv_total, big_data_weighted_total, calibrate_big_data, co_bd_total, co_cal_kwfr_total, dr_total, hajek_ipw,
    hot_deck_total, kwfr_total, split_population_total, DrVariant, LinearModel, MiModels,
};
pub use probability::{greg_total, ht_total, qr_ma_total, rdi_total, weighted_totals};

/// Totals indexed by [`Variable::index`].
pub type Totals = [f64; 3];

/// Where big-data values come from: true, as reported, or reported and then
/// corrected through per-variable measurement-error models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ValueSource {
    True,
    Starred,
    /// Models applied to the reported values (starred when `starred`).
    Corrected { models: [MeModel; 3], starred: bool },
}

impl ValueSource {
    pub fn observed(use_starred: bool) -> Self {
        if use_starred {
            ValueSource::Starred
        } else {
            ValueSource::True
        }
    }

    pub fn values(&self, u: &UnitRecord) -> Totals {
        match self {
            ValueSource::True => u.values(),
            ValueSource::Starred => Variable::ALL.map(|v| u.starred(v)),
            ValueSource::Corrected { models, starred } => {
                Variable::ALL.map(|v| models[v.index()].correct(u.observed(v, *starred)))
            }
        }
    }
}

/// AWE = earnings total / employment total.
pub fn awe_ratio(totals: &Totals) -> Result<f64> {
    let emp = totals[Variable::Emp.index()];
    if !(emp > 0.0) {
        return Err(Error::ZeroDenominator("employment total"));
    }
    Ok(totals[Variable::Earn.index()] / emp)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorOutput {
    pub id: EstimatorId,
    pub totals: Totals,
    pub awe: f64,
    pub diagnostics: BTreeMap<&'static str, f64>,
}

impl EstimatorOutput {
    pub fn new(id: EstimatorId, totals: Totals) -> Result<Self> {
        Ok(Self {
            id,
            awe: awe_ratio(&totals)?,
            totals,
            diagnostics: BTreeMap::new(),
        })
    }

    pub fn with(mut self, key: &'static str, value: f64) -> Self {
        self.diagnostics.insert(key, value);
        self
    }
}

macro_rules! estimator_ids {
    ($($variant:ident => $name:literal, $design:expr, $group:literal;)*) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub enum EstimatorId {
            $($variant,)*
        }

        impl EstimatorId {
            pub const ALL: &'static [EstimatorId] = &[$(EstimatorId::$variant,)*];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(EstimatorId::$variant => $name,)*
                }
            }

            /// The reference sample the estimator reads, if any.
            pub fn design(self) -> Option<DesignKind> {
                match self {
                    $(EstimatorId::$variant => $design,)*
                }
            }

            /// Report grouping: the design family the estimator belongs to.
            pub fn group(self) -> &'static str {
                match self {
                    $(EstimatorId::$variant => $group,)*
                }
            }
        }
    };
}

estimator_ids! {
    Ht => "ht", Some(DesignKind::Single), "single";
    Greg => "greg", Some(DesignKind::Single), "single";
    Rdi => "rdi", Some(DesignKind::Single), "single";
    QrMa => "qr_ma", Some(DesignKind::Single), "single";
    Kw => "kw", Some(DesignKind::Single), "single";
    KwCal => "kw_cal", Some(DesignKind::Single), "single";
    KwEarn => "kw_earn", Some(DesignKind::Single), "single";
    Alp => "alp", Some(DesignKind::Single), "single";
    WgtRegMi => "wgt_reg_mi", Some(DesignKind::Single), "single";
    DrWgt => "dr_wgt", Some(DesignKind::Single), "single";
    HdMi => "hd_mi", Some(DesignKind::Single), "single";
    KwCor => "kw_cor", Some(DesignKind::Single), "single";
    KwCalCor => "kw_cal_cor", Some(DesignKind::Single), "single";
    Sp => "sp", Some(DesignKind::DualScreening), "dual_screening";
    SpCal => "sp_cal", Some(DesignKind::DualScreening), "dual_screening";
    CoBd => "co_bd", Some(DesignKind::Cutoff), "cutoff";
    CoCalKwfr => "co_cal_kwfr", Some(DesignKind::Cutoff), "cutoff";
    CoCalKwfrCor => "co_cal_kwfr_cor", Some(DesignKind::Cutoff), "cutoff";
    Auxdiv => "auxdiv", None, "big_data";
    Kwfr => "kwfr", None, "big_data";
    KwfrCor => "kwfr_cor", Some(DesignKind::Single), "big_data";
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorId::ALL
            .iter()
            .copied()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::config("estimators", format!("unknown estimator {s:?}")))
    }
}

impl TryFrom<String> for EstimatorId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<EstimatorId> for String {
    fn from(id: EstimatorId) -> String {
        id.as_str().to_string()
    }
}
