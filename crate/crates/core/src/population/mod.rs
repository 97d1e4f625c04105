//! Synthetic business population.
//!
//! Employment pairs come from a Vale–Maurelli generator per (size group,
//! industry) cell; wages, overtime and mis-measured copies are layered on top.

mod config;
mod fleishman;
mod io;
mod vale_maurelli;

use rand::Rng as _;
use rand_distr::{Distribution, Exp, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{
    group_index, MeasurementErrorConfig, MomentRow, OvertimeConfig, PopulationConfig, Proportions,
    ResolvedConfig, StateProportions, WageVarianceRow,
};
pub use fleishman::{solve_fleishman, FleishmanCoeffs, MomentSpec};
pub use io::{load_population, save_population, write_population, CSV_HEADER};
pub use vale_maurelli::{
    intermediate_correlation, transformed_correlation, vale_maurelli_pair, PairGenerator,
};

use crate::error::Result;
use crate::rng;

pub const STATES: [&str; 8] = ["NSW", "VIC", "QLD", "SA", "WA", "TAS", "NT", "ACT"];
pub const INDUSTRIES: [&str; 18] = [
    "B", "C", "D", "E", "F", "G", "H", "I", "J", "K", "L", "M", "N", "O", "P", "Q", "R", "S",
];
pub const SIZE_GROUPS: [&str; 14] = [
    "0-4", "5-19", "20-49", "50-99", "100-149", "150-199", "200-249", "249-299", "300-349",
    "349-399", "400-449", "449-499", "500-999", "1000+",
];

const SIZE_GROUP_LOWER: [u32; 14] = [0, 5, 20, 50, 100, 150, 200, 250, 300, 350, 400, 450, 500, 1000];

/// Index into [`SIZE_GROUPS`] of the group containing a frame employment.
pub fn size_group_of(frame_employment: u32) -> u8 {
    (SIZE_GROUP_LOWER.partition_point(|&lo| lo <= frame_employment) - 1) as u8
}

/// Survey variables carried by every unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variable {
    Earn,
    Emp,
    Ovt,
}

impl Variable {
    pub const ALL: [Variable; 3] = [Variable::Earn, Variable::Emp, Variable::Ovt];

    pub fn name(self) -> &'static str {
        match self {
            Variable::Earn => "earn",
            Variable::Emp => "emp",
            Variable::Ovt => "ovt",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Frame-employment bands used for stratification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SizeBand {
    Micro,
    Small,
    Medium,
    Large,
}

impl SizeBand {
    pub const ALL: [SizeBand; 4] = [SizeBand::Micro, SizeBand::Small, SizeBand::Medium, SizeBand::Large];

    pub fn of(frame_employment: u32) -> Self {
        match frame_employment {
            0..=4 => SizeBand::Micro,
            5..=19 => SizeBand::Small,
            20..=299 => SizeBand::Medium,
            _ => SizeBand::Large,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SizeBand::Micro => "0-4",
            SizeBand::Small => "5-19",
            SizeBand::Medium => "20-299",
            SizeBand::Large => "300+",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitRecord {
    pub unit_id: u64,
    pub state: u8,
    pub industry: u8,
    pub size_group: u8,
    pub frame_employment: u32,
    pub reported_employment: u32,
    pub earnings: f64,
    pub overtime: f64,
    pub earnings_star: f64,
    pub emp_star: f64,
    pub ovt_star: f64,
}

impl UnitRecord {
    pub fn size_band(&self) -> SizeBand {
        SizeBand::of(self.frame_employment)
    }

    #[inline]
    pub fn x(&self) -> f64 {
        f64::from(self.frame_employment)
    }

    #[inline]
    pub fn value(&self, var: Variable) -> f64 {
        match var {
            Variable::Earn => self.earnings,
            Variable::Emp => f64::from(self.reported_employment),
            Variable::Ovt => self.overtime,
        }
    }

    #[inline]
    pub fn starred(&self, var: Variable) -> f64 {
        match var {
            Variable::Earn => self.earnings_star,
            Variable::Emp => self.emp_star,
            Variable::Ovt => self.ovt_star,
        }
    }

    /// `starred(var)` when `use_starred`, else the true value.
    #[inline]
    pub fn observed(&self, var: Variable, use_starred: bool) -> f64 {
        if use_starred {
            self.starred(var)
        } else {
            self.value(var)
        }
    }

    pub fn values(&self) -> [f64; 3] {
        Variable::ALL.map(|v| self.value(v))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    Synthesized { seed: u64, config_hash: String },
    Ingested { file_hash: String },
}

#[derive(Debug, Clone)]
pub struct PopulationFrame {
    units: Vec<UnitRecord>,
    pub provenance: Provenance,
}

impl PopulationFrame {
    /// Builds a frame, renumbering `unit_id` densely from 1 in the given order.
    pub fn from_units(mut units: Vec<UnitRecord>, provenance: Provenance) -> Self {
        for (i, u) in units.iter_mut().enumerate() {
            u.unit_id = i as u64 + 1;
        }
        Self { units, provenance }
    }

    pub(crate) fn from_dense_units(units: Vec<UnitRecord>, provenance: Provenance) -> Self {
        debug_assert!(units.iter().enumerate().all(|(i, u)| u.unit_id == i as u64 + 1));
        Self { units, provenance }
    }

    pub fn units(&self) -> &[UnitRecord] {
        &self.units
    }

    pub fn n(&self) -> usize {
        self.units.len()
    }

    pub fn unit(&self, index: usize) -> &UnitRecord {
        &self.units[index]
    }

    /// Population totals of (earn, emp, ovt) on true values.
    pub fn totals(&self) -> [f64; 3] {
        self.units.iter().fold([0.0; 3], |mut acc, u| {
            for (a, v) in acc.iter_mut().zip(u.values()) {
                *a += v;
            }
            acc
        })
    }

    pub fn frame_employment_total(&self) -> f64 {
        self.units.iter().map(UnitRecord::x).sum()
    }
}

fn normal_sd(v: f64, as_sd: bool) -> f64 {
    if as_sd {
        v
    } else {
        v.sqrt()
    }
}

/// Cell counts that sum exactly to `n`: floors of the quotas plus one extra
/// unit for the largest fractional remainders, ties to the lower index.
pub fn largest_remainder(n: usize, shares: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = shares.iter().map(|p| p * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

fn categorical(shares: &[f64; 8], u: f64) -> u8 {
    let mut acc = 0.0;
    for (i, p) in shares.iter().enumerate() {
        acc += p;
        if u < acc {
            return i as u8;
        }
    }
    // guard against rounding in the cumulative sum
    shares.iter().rposition(|p| *p > 0.0).unwrap_or(0) as u8
}

fn generate_cell(
    cfg: &ResolvedConfig,
    generator: &PairGenerator,
    group: usize,
    industry: usize,
    count: usize,
    mut rng: rng::Rng,
) -> Vec<UnitRecord> {
    let (noise_f, noise_e) = if cfg.swap_wage_variances {
        (cfg.v_e[group], cfg.v_s[group])
    } else {
        (cfg.v_s[group], cfg.v_e[group])
    };
    let f_sd = normal_sd(noise_f, cfg.variance_as_sd);
    let me_sd = normal_sd(cfg.me.factor_variance, cfg.variance_as_sd);
    let states = cfg.state_shares(group, industry);
    let p_ovt = cfg.overtime_probabilities[industry];
    let exp = (cfg.overtime_mean_factor > 0.0).then(|| Exp::new(1.0 / cfg.overtime_mean_factor).unwrap());
    let contamination = Uniform::new_inclusive(cfg.me.contamination_low, cfg.me.contamination_high).unwrap();

    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let (fx, fy) = generator.draw(&mut rng);
        let frame_employment = fx.round().max(0.0) as u32;
        let reported_employment = fy.round().max(0.0) as u32;
        let state = categorical(states, rng.random::<f64>());

        let z: f64 = rng.sample(rand_distr::StandardNormal);
        let factor = cfg.wage_factors[industry] + f_sd * z;
        let e_sd = normal_sd(noise_e * f64::from(frame_employment), cfg.variance_as_sd);
        let eps = e_sd * rng.sample::<f64, _>(rand_distr::StandardNormal);
        let earnings = (cfg.awe * factor * f64::from(reported_employment) + eps).max(0.0);

        let has_ovt = rng.random::<f64>() < p_ovt;
        let overtime = match (&exp, has_ovt) {
            (Some(exp), true) if earnings > 0.0 => {
                // truncated to (0, 1] so overtime never exceeds earnings
                let mut f = exp.sample(&mut rng);
                let mut tries = 0;
                while f > 1.0 && tries < 1000 {
                    f = exp.sample(&mut rng);
                    tries += 1;
                }
                f.min(1.0) * earnings
            }
            _ => 0.0,
        };

        let mut multiplier = Normal::new(cfg.me.factor_mean, me_sd).unwrap().sample(&mut rng);
        if rng.random::<f64>() < cfg.me.contamination_rate {
            multiplier *= contamination.sample(&mut rng);
        }

        out.push(UnitRecord {
            unit_id: 0,
            state,
            industry: industry as u8,
            size_group: group as u8,
            frame_employment,
            reported_employment,
            earnings,
            overtime,
            earnings_star: earnings * multiplier,
            emp_star: f64::from(reported_employment) * multiplier,
            ovt_star: overtime * multiplier,
        });
    }
    out
}

/// Generates the population as a pure function of `(config, seed)`.
///
/// Cells run in parallel, each on its own stream derived from the seed and
/// the cell index, so the result does not depend on scheduling.
pub fn synthesize_population(config: &PopulationConfig, seed: u64) -> Result<PopulationFrame> {
    let cfg = config.resolve()?;
    let generators = cfg
        .moments
        .iter()
        .map(|(fx, fy, cov)| PairGenerator::new(*fx, *fy, *cov))
        .collect::<Result<Vec<_>>>()?;

    let shares: Vec<f64> = (0..14)
        .flat_map(|g| {
            let cfg = &cfg;
            (0..18).map(move |d| cfg.size_groups[g] * cfg.industry_within_size[g][d])
        })
        .collect();
    let counts = largest_remainder(cfg.n, &shares);

    let cells: Vec<Vec<UnitRecord>> = counts
        .par_iter()
        .enumerate()
        .map(|(cell, &count)| {
            let (g, d) = (cell / 18, cell % 18);
            let rng = rng::stream(seed, &[cell as u64]);
            generate_cell(&cfg, &generators[g], g, d, count, rng)
        })
        .collect();

    let units: Vec<UnitRecord> = cells.into_iter().flatten().collect();
    Ok(PopulationFrame::from_units(
        units,
        Provenance::Synthesized {
            seed,
            config_hash: config.hash(),
        },
    ))
}
