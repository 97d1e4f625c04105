//! Reference sample design: strata, optimal allocation, and the three frame
//! variants (single, screening dual frame, cut-off).

mod allocation;
mod sampling;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use allocation::{
    anticipated_rse, bethel_chromy_allocate, Allocation, AllocationOptions, ConstraintSpec, Domain,
};
pub use sampling::{draw_stratified_sample, WeightedSample};

use crate::bigdata::BigDataset;
use crate::population::{PopulationFrame, SizeBand};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StratumKey {
    pub state: u8,
    pub industry: u8,
    pub band: SizeBand,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stratum {
    pub key: StratumKey,
    /// Frame indices of the stratum's units, ascending.
    pub units: Vec<usize>,
    /// Standard deviation of true earnings (divisor N_h − 1; zero when N_h = 1).
    pub s_h: f64,
    pub y_total: f64,
    pub take_all: bool,
}

impl Stratum {
    pub fn n_pop(&self) -> usize {
        self.units.len()
    }
}

/// Partitions a frame subset by (state, industry, size band). Empty cells
/// are omitted; strata come back ordered by key.
pub fn stratify(frame: &PopulationFrame, subset: &[usize]) -> Vec<Stratum> {
    let mut cells: BTreeMap<StratumKey, Vec<usize>> = BTreeMap::new();
    for &i in subset {
        let u = frame.unit(i);
        let key = StratumKey {
            state: u.state,
            industry: u.industry,
            band: u.size_band(),
        };
        cells.entry(key).or_default().push(i);
    }
    cells
        .into_iter()
        .map(|(key, mut units)| {
            units.sort_unstable();
            let n = units.len() as f64;
            let y_total: f64 = units.iter().map(|&i| frame.unit(i).earnings).sum();
            let mean = y_total / n;
            let ss: f64 = units
                .iter()
                .map(|&i| (frame.unit(i).earnings - mean).powi(2))
                .sum();
            let s_h = if units.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 };
            Stratum {
                key,
                units,
                s_h,
                y_total,
                take_all: key.band == SizeBand::Large,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    Single,
    DualScreening,
    Cutoff,
}

impl DesignKind {
    pub const ALL: [DesignKind; 3] = [DesignKind::Single, DesignKind::DualScreening, DesignKind::Cutoff];

    pub fn name(self) -> &'static str {
        match self {
            DesignKind::Single => "single",
            DesignKind::DualScreening => "dual_screening",
            DesignKind::Cutoff => "cutoff",
        }
    }

    /// Whether the sampling frame changes with the realized big dataset.
    pub fn depends_on_big_data(self) -> bool {
        self == DesignKind::DualScreening
    }
}

/// Sampling frame and excluded part for a design, as frame indices.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignFrame {
    pub sampling: Vec<usize>,
    pub excluded: Vec<usize>,
}

pub fn build_design_frame(frame: &PopulationFrame, big: Option<&BigDataset>, design: DesignKind) -> DesignFrame {
    let all = 0..frame.n();
    match design {
        DesignKind::Single => DesignFrame {
            sampling: all.collect(),
            excluded: Vec::new(),
        },
        DesignKind::DualScreening => {
            let big = big.expect("dual-frame design needs the big dataset");
            let (excluded, sampling) = all.partition(|&i| big.contains(i));
            DesignFrame { sampling, excluded }
        }
        DesignKind::Cutoff => {
            let (excluded, sampling) = all.partition(|&i| frame.unit(i).size_band() == SizeBand::Micro);
            DesignFrame { sampling, excluded }
        }
    }
}
