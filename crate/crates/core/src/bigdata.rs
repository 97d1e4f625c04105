//! Selection of the non-probability dataset B.

use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::{PopulationFrame, INDUSTRIES};
use crate::rng::Rng;

fn default_downweights() -> BTreeMap<String, f64> {
    ["G", "H", "S"].iter().map(|d| (d.to_string(), 0.5)).collect()
}

/// Two-stage selection law: a logistic score in frame employment and log
/// earnings, then multiplicative industry downweights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionModel {
    pub phi: [f64; 3],
    #[serde(default = "default_downweights")]
    pub downweights: BTreeMap<String, f64>,
}

impl SelectionModel {
    pub fn sar() -> Self {
        Self {
            phi: [0.09, 0.009, 0.0],
            downweights: default_downweights(),
        }
    }

    pub fn snar() -> Self {
        Self {
            phi: [0.85, 0.009, -0.1],
            ..Self::sar()
        }
    }

    pub fn is_sar(&self) -> bool {
        self.phi[2] == 0.0
    }

    fn downweight_table(&self) -> Result<[f64; 18]> {
        let mut table = [1.0; 18];
        for (k, &f) in &self.downweights {
            let d = INDUSTRIES
                .iter()
                .position(|i| i == k)
                .ok_or_else(|| Error::config(format!("selection_model.downweights.{k}"), "unknown industry"))?;
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::config(
                    format!("selection_model.downweights.{k}"),
                    "factor must lie in [0, 1]",
                ));
            }
            table[d] = f;
        }
        Ok(table)
    }
}

#[inline]
pub fn inverse_logit(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `inverse_logit(φ0 + φ1·x + φ2·ln(max(earn, 1))) × downweight(industry)`
/// for every unit of the frame.
pub fn selection_probabilities(frame: &PopulationFrame, model: &SelectionModel) -> Result<Vec<f64>> {
    let dw = model.downweight_table()?;
    let [p0, p1, p2] = model.phi;
    frame
        .units()
        .iter()
        .map(|u| {
            let log_earn = if p2 != 0.0 {
                if !(u.earnings >= 0.0) {
                    return Err(Error::NonPositiveEarnings(u.unit_id));
                }
                u.earnings.max(1.0).ln()
            } else {
                0.0
            };
            Ok(inverse_logit(p0 + p1 * u.x() + p2 * log_earn) * dw[u.industry as usize])
        })
        .collect()
}

/// Realized big dataset: membership indicators over the frame.
#[derive(Debug, Clone, PartialEq)]
pub struct BigDataset {
    delta: Vec<bool>,
    members: Vec<usize>,
    pub true_pi: Vec<f64>,
    pub use_starred: bool,
}

impl BigDataset {
    pub fn from_delta(delta: Vec<bool>, true_pi: Vec<f64>, use_starred: bool) -> Self {
        let members = delta.iter().enumerate().filter(|(_, d)| **d).map(|(i, _)| i).collect();
        Self {
            delta,
            members,
            true_pi,
            use_starred,
        }
    }

    /// Frame indices (0-based) of the members, ascending.
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn member_ids(&self) -> Vec<u64> {
        self.members.iter().map(|&i| i as u64 + 1).collect()
    }

    #[inline]
    pub fn contains(&self, index: usize) -> bool {
        self.delta[index]
    }

    pub fn delta(&self) -> &[bool] {
        &self.delta
    }

    pub fn n_b(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Poisson sampling: independent Bernoulli(π_k) membership per unit.
pub fn draw_big_dataset(pi: &[f64], use_starred: bool, rng: &mut Rng) -> Result<BigDataset> {
    if let Some(p) = pi.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Invalid(format!("selection probability {p} outside [0, 1]")));
    }
    let delta = pi.iter().map(|&p| rng.random::<f64>() < p).collect();
    Ok(BigDataset::from_delta(delta, pi.to_vec(), use_starred))
}
