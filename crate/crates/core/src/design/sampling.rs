use rand::seq::index;

use super::{Allocation, Stratum};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// A drawn sample: frame indices with weights, stratum membership, and the
/// big-data linkage indicator for each unit.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightedSample {
    pub units: Vec<usize>,
    pub weights: Vec<f64>,
    pub strata: Vec<u32>,
    pub delta: Vec<bool>,
}

impl WeightedSample {
    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    /// Fills the linkage indicators from a membership lookup.
    pub fn link(&mut self, in_big: impl Fn(usize) -> bool) {
        self.delta = self.units.iter().map(|&i| in_big(i)).collect();
    }

    pub fn weight_total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Self {
        assert_eq!(weights.len(), self.units.len());
        Self {
            weights,
            ..self.clone()
        }
    }
}

/// Stratified SRSWOR: `n_h` distinct units per stratum, design weight
/// `N_h / n_h`.
pub fn draw_stratified_sample(strata: &[Stratum], allocation: &Allocation, rng: &mut Rng) -> Result<WeightedSample> {
    if strata.len() != allocation.n_h.len() {
        return Err(Error::Invalid("allocation does not match strata".into()));
    }
    let mut out = WeightedSample::default();
    for (h, (s, &n)) in strata.iter().zip(&allocation.n_h).enumerate() {
        let big_n = s.n_pop();
        if n > big_n {
            return Err(Error::Invalid(format!("stratum {h}: n_h = {n} exceeds N_h = {big_n}")));
        }
        if n == 0 {
            continue;
        }
        let w = big_n as f64 / n as f64;
        let mut picked: Vec<usize> = if n == big_n {
            s.units.clone()
        } else {
            index::sample(rng, big_n, n).into_iter().map(|k| s.units[k]).collect()
        };
        picked.sort_unstable();
        for i in picked {
            out.units.push(i);
            out.weights.push(w);
            out.strata.push(h as u32);
        }
    }
    out.delta = vec![false; out.units.len()];
    Ok(out)
}
