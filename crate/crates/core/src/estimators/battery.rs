//! Evaluates an estimator roster on one replicate, sharing fitted models
//! between estimators that use them.

use std::cell::OnceCell;
use std::collections::BTreeMap;

use crate::bigdata::BigDataset;
use crate::design::{DesignKind, WeightedSample};
use crate::error::{Error, Result};
use crate::population::{PopulationFrame, Variable};
use crate::rng::Rng;
use crate::weighting::{
    alp_propensities, fit_me_model_weighted, frame_propensities, kw_propensities, CovariateSpec, LogisticOptions, MeModel,
};

use super::big_data::{
    auxdiv_total, big_data_weighted_total, calibrate_big_data, co_bd_total, co_cal_kwfr_total, dr_total, hajek_ipw,
    hot_deck_total, kwfr_total, split_population_total, DrVariant, MiModels,
};
use super::probability::{greg_total, ht_total, qr_ma_total, rdi_total};
use super::{EstimatorId, EstimatorOutput, ValueSource};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryOptions {
    pub logistic: LogisticOptions,
    pub dr_variant: DrVariant,
    /// Mass imputation sums over A with GREG weights instead of design
    /// weights.
    pub mi_calibrated_weights: bool,
}

impl Default for BatteryOptions {
    fn default() -> Self {
        Self {
            logistic: LogisticOptions::default(),
            dr_variant: DrVariant::Dr2,
            mi_calibrated_weights: false,
        }
    }
}

/// Everything one replicate produces before estimation. Samples carry their
/// linkage indicators.
pub struct ReplicateInputs<'a> {
    pub frame: &'a PopulationFrame,
    pub big: &'a BigDataset,
    pub samples: BTreeMap<DesignKind, WeightedSample>,
    pub hot_deck_rng: Rng,
}

type Shared<T> = OnceCell<std::result::Result<T, String>>;

struct Cache {
    kw: Shared<Vec<f64>>,
    kw_earn: Shared<Vec<f64>>,
    frame_pi: Shared<Vec<f64>>,
    me: BTreeMap<DesignKind, Shared<[MeModel; 3]>>,
    mi: Shared<MiModels>,
}

fn shared<T: Clone>(cell: &Shared<T>, what: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    cell.get_or_init(|| f().map_err(|e| e.to_string()))
        .clone()
        .map_err(|message| Error::Dependency { what, message })
}

struct Ctx<'a, 'b> {
    inputs: &'b mut ReplicateInputs<'a>,
    opts: &'b BatteryOptions,
    cache: Cache,
}

impl Ctx<'_, '_> {
    fn frame(&self) -> &PopulationFrame {
        self.inputs.frame
    }

    fn sample(&self, design: DesignKind) -> Result<&WeightedSample> {
        self.inputs
            .samples
            .get(&design)
            .ok_or_else(|| Error::Invalid(format!("no {} sample in this replicate", design.name())))
    }

    fn observed(&self) -> ValueSource {
        ValueSource::observed(self.inputs.big.use_starred)
    }

    fn kw(&self, log_earnings: bool) -> Result<Vec<f64>> {
        let cell = if log_earnings { &self.cache.kw_earn } else { &self.cache.kw };
        shared(cell, "KW propensity fit", || {
            let a = self.sample(DesignKind::Single)?;
            let model = kw_propensities(self.frame(), a, CovariateSpec { log_earnings }, &self.opts.logistic)?;
            Ok(model.predict_members(self.frame(), self.inputs.big))
        })
    }

    fn frame_pi(&self) -> Result<Vec<f64>> {
        shared(&self.cache.frame_pi, "frame propensity fit", || {
            let model = frame_propensities(self.frame(), self.inputs.big, CovariateSpec::default(), &self.opts.logistic)?;
            Ok(model.predict_members(self.frame(), self.inputs.big))
        })
    }

    /// Per-variable ME models from the linked part of a design's sample:
    /// true values from A against B's reported values, design weighted.
    fn me(&self, design: DesignKind) -> Result<ValueSource> {
        let cell = &self.cache.me[&design];
        let models = shared(cell, "measurement error fit", || {
            let a = self.sample(design)?;
            let (linked, w): (Vec<usize>, Vec<f64>) = a
                .units
                .iter()
                .zip(&a.weights)
                .zip(&a.delta)
                .filter(|(_, d)| **d)
                .map(|((&i, &w), _)| (i, w))
                .unzip();
            let fit = |v: Variable| {
                let y: Vec<f64> = linked.iter().map(|&i| self.frame().unit(i).value(v)).collect();
                let ys: Vec<f64> = linked
                    .iter()
                    .map(|&i| self.frame().unit(i).observed(v, self.inputs.big.use_starred))
                    .collect();
                fit_me_model_weighted(&y, &ys, &w)
            };
            Ok([fit(Variable::Earn)?, fit(Variable::Emp)?, fit(Variable::Ovt)?])
        })?;
        Ok(ValueSource::Corrected {
            models,
            starred: self.inputs.big.use_starred,
        })
    }

    fn mi(&self) -> Result<MiModels> {
        shared(&self.cache.mi, "weighted regression imputation fit", || {
            let pi = self.kw(false)?;
            let w: Vec<f64> = pi.iter().map(|p| 1.0 / p).collect();
            MiModels::fit(self.frame(), self.inputs.big.members(), &w, self.observed())
        })
    }

    fn mi_weights(&self) -> Result<Vec<f64>> {
        let a = self.sample(DesignKind::Single)?;
        if self.opts.mi_calibrated_weights {
            let f = self.frame();
            Ok(greg_total(f, a, [f.n() as f64, f.frame_employment_total()])?.1.weights)
        } else {
            Ok(a.weights.clone())
        }
    }

    fn evaluate(&mut self, id: EstimatorId) -> Result<EstimatorOutput> {
        let frame = self.inputs.frame;
        let big = self.inputs.big;
        let n = frame.n() as f64;
        let obs = self.observed();
        let needs_b = !matches!(id, EstimatorId::Ht | EstimatorId::Greg | EstimatorId::Rdi | EstimatorId::QrMa);
        if needs_b && big.is_empty() && !matches!(id, EstimatorId::Sp | EstimatorId::SpCal | EstimatorId::CoBd) {
            return Err(Error::EmptyBigData);
        }
        match id {
            EstimatorId::Ht => EstimatorOutput::new(id, ht_total(frame, self.sample(DesignKind::Single)?)),
            EstimatorId::Greg => {
                let (t, cal) = greg_total(frame, self.sample(DesignKind::Single)?, [n, frame.frame_employment_total()])?;
                Ok(EstimatorOutput::new(id, t)?.with("negative_weights", cal.negative_weights as f64))
            }
            EstimatorId::Rdi => {
                let (t, cal) = rdi_total(frame, self.sample(DesignKind::Single)?, big)?;
                Ok(EstimatorOutput::new(id, t)?.with("negative_weights", cal.negative_weights as f64))
            }
            EstimatorId::QrMa => EstimatorOutput::new(id, qr_ma_total(frame, self.sample(DesignKind::Single)?, big)?),
            EstimatorId::Kw | EstimatorId::KwEarn | EstimatorId::KwCor => {
                let pi = self.kw(id == EstimatorId::KwEarn)?;
                let src = if id == EstimatorId::KwCor { self.me(DesignKind::Single)? } else { obs };
                EstimatorOutput::new(id, hajek_ipw(frame, big.members(), &pi, n, src)?)
            }
            EstimatorId::KwCal | EstimatorId::KwCalCor => {
                let pi = self.kw(false)?;
                let cal = calibrate_big_data(frame, big, &pi)?;
                let src = if id == EstimatorId::KwCalCor { self.me(DesignKind::Single)? } else { obs };
                let t = big_data_weighted_total(frame, big, &cal.weights, src);
                Ok(EstimatorOutput::new(id, t)?.with("negative_weights", cal.negative_weights as f64))
            }
            EstimatorId::Alp => {
                let a = self.sample(DesignKind::Single)?;
                let model = alp_propensities(frame, a, big, CovariateSpec::default(), &self.opts.logistic)?;
                let pi = model.predict_members(frame, big);
                let above_one = pi.iter().filter(|&&p| p > 1.0).count();
                Ok(EstimatorOutput::new(id, hajek_ipw(frame, big.members(), &pi, n, obs)?)?
                    .with("propensity_above_one", above_one as f64))
            }
            EstimatorId::WgtRegMi => {
                let models = self.mi()?;
                let w = self.mi_weights()?;
                EstimatorOutput::new(id, models.impute_total(frame, self.sample(DesignKind::Single)?, &w))
            }
            EstimatorId::DrWgt => {
                let models = self.mi()?;
                let pi = self.kw(false)?;
                let a = self.sample(DesignKind::Single)?;
                let t = dr_total(frame, a, big, &pi, &|u| models.predict(u), obs, self.opts.dr_variant)?;
                EstimatorOutput::new(id, t)
            }
            EstimatorId::HdMi => {
                let w = self.mi_weights()?;
                let a = self.sample(DesignKind::Single)?.clone();
                let t = hot_deck_total(frame, &a, &w, big, obs, &mut self.inputs.hot_deck_rng)?;
                EstimatorOutput::new(id, t)
            }
            EstimatorId::Sp | EstimatorId::SpCal => {
                let c = self.sample(DesignKind::DualScreening)?;
                let (t, cal) = split_population_total(frame, big, c, id == EstimatorId::SpCal, obs)?;
                let out = EstimatorOutput::new(id, t)?;
                Ok(match cal {
                    Some(cal) => out.with("negative_weights", cal.negative_weights as f64),
                    None => out,
                })
            }
            EstimatorId::CoBd => EstimatorOutput::new(id, co_bd_total(frame, self.sample(DesignKind::Cutoff)?, big, obs)),
            EstimatorId::CoCalKwfr | EstimatorId::CoCalKwfrCor => {
                let pi = self.frame_pi()?;
                let src = if id == EstimatorId::CoCalKwfrCor { self.me(DesignKind::Cutoff)? } else { obs };
                let (t, cal, empty) = co_cal_kwfr_total(frame, self.sample(DesignKind::Cutoff)?, big, &pi, src)?;
                Ok(EstimatorOutput::new(id, t)?
                    .with("negative_weights", cal.negative_weights as f64)
                    .with("empty_take_none", f64::from(u8::from(empty))))
            }
            EstimatorId::Auxdiv => {
                let (t, missing) = auxdiv_total(frame, big, obs)?;
                Ok(EstimatorOutput::new(id, t)?.with("divisions_without_big_data", missing as f64))
            }
            EstimatorId::Kwfr | EstimatorId::KwfrCor => {
                let pi = self.frame_pi()?;
                let src = if id == EstimatorId::KwfrCor { self.me(DesignKind::Single)? } else { obs };
                EstimatorOutput::new(id, kwfr_total(frame, big, &pi, src)?)
            }
        }
    }
}

/// Evaluates each estimator in roster order; a failure is recorded for that
/// estimator and the rest still run.
pub fn evaluate_roster(
    inputs: &mut ReplicateInputs<'_>,
    roster: &[EstimatorId],
    opts: &BatteryOptions,
) -> Vec<(EstimatorId, Result<EstimatorOutput>)> {
    let cache = Cache {
        kw: OnceCell::new(),
        kw_earn: OnceCell::new(),
        frame_pi: OnceCell::new(),
        me: DesignKind::ALL.iter().map(|&d| (d, OnceCell::new())).collect(),
        mi: OnceCell::new(),
    };
    let mut ctx = Ctx { inputs, opts, cache };
    roster.iter().map(|&id| (id, ctx.evaluate(id))).collect()
}
