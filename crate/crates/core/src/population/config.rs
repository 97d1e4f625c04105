use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::fleishman::MomentSpec;
use super::{INDUSTRIES, SIZE_GROUPS, STATES};
use crate::error::{Error, Result};

const DEFAULT_CONFIG: &str = include_str!("../../assets/default_population.json");

fn default_awe() -> f64 {
    1740.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationConfig {
    pub n: usize,
    pub seed: u64,
    pub proportions: Proportions,
    pub moments: Vec<MomentRow>,
    pub wage_factors: BTreeMap<String, f64>,
    pub wage_variances: Vec<WageVarianceRow>,
    #[serde(default = "default_awe")]
    pub average_weekly_earnings: f64,
    pub overtime: OvertimeConfig,
    pub measurement_error: MeasurementErrorConfig,
    /// Read the second argument of every `Normal(mu, v)` as a standard
    /// deviation instead of a variance.
    #[serde(default)]
    pub variance_as_sd: bool,
    /// Use `v_e` for the wage-factor noise and `v_s` for the additive error.
    #[serde(default)]
    pub swap_wage_variances: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Proportions {
    pub size_groups: BTreeMap<String, f64>,
    pub industry_within_size: BTreeMap<String, BTreeMap<String, f64>>,
    pub state: StateProportions,
}

/// State shares, either one vector for every cell or one per (size group, industry).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateProportions {
    Shared(BTreeMap<String, f64>),
    ByCell(BTreeMap<String, BTreeMap<String, BTreeMap<String, f64>>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentRow {
    pub group: String,
    pub frame: MomentSpec,
    pub reported: MomentSpec,
    pub covariance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WageVarianceRow {
    pub group: String,
    pub v_e: f64,
    pub v_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OvertimeConfig {
    pub probabilities: BTreeMap<String, f64>,
    pub mean_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementErrorConfig {
    pub factor_mean: f64,
    pub factor_variance: f64,
    pub contamination_rate: f64,
    pub contamination_low: f64,
    pub contamination_high: f64,
}

impl MeasurementErrorConfig {
    pub fn none() -> Self {
        Self {
            factor_mean: 1.0,
            factor_variance: 0.0,
            contamination_rate: 0.0,
            contamination_low: 1.0,
            contamination_high: 1.0,
        }
    }
}

/// Config with every table resolved into dense arrays indexed by
/// size group, industry and state.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub n: usize,
    pub size_groups: [f64; 14],
    pub industry_within_size: [[f64; 18]; 14],
    pub state: Vec<[f64; 8]>, // one per cell, or a single shared row
    pub moments: [(MomentSpec, MomentSpec, f64); 14],
    pub wage_factors: [f64; 18],
    pub v_e: [f64; 14],
    pub v_s: [f64; 14],
    pub awe: f64,
    pub overtime_probabilities: [f64; 18],
    pub overtime_mean_factor: f64,
    pub me: MeasurementErrorConfig,
    pub variance_as_sd: bool,
    pub swap_wage_variances: bool,
}

impl ResolvedConfig {
    pub fn state_shares(&self, group: usize, industry: usize) -> &[f64; 8] {
        if self.state.len() == 1 {
            &self.state[0]
        } else {
            &self.state[group * 18 + industry]
        }
    }
}

fn lookup<'a>(map: &'a BTreeMap<String, f64>, key: &str, path: &str) -> Result<f64> {
    map.get(key)
        .copied()
        .ok_or_else(|| Error::config(format!("{path}.{key}"), "missing parameter table entry"))
}

fn check_unknown(map_keys: impl Iterator<Item = impl AsRef<str>>, allowed: &[&str], path: &str) -> Result<()> {
    for k in map_keys {
        if !allowed.contains(&k.as_ref()) {
            return Err(Error::config(format!("{path}.{}", k.as_ref()), "unknown level"));
        }
    }
    Ok(())
}

fn dense<const K: usize>(map: &BTreeMap<String, f64>, labels: &[&str; K], path: &str) -> Result<[f64; K]> {
    check_unknown(map.keys(), labels, path)?;
    let mut out = [0.0; K];
    for (slot, label) in out.iter_mut().zip(labels) {
        *slot = lookup(map, label, path)?;
    }
    Ok(out)
}

fn check_shares(shares: &[f64], path: &str) -> Result<()> {
    if shares.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
        return Err(Error::config(path, "proportions must be non-negative"));
    }
    let sum: f64 = shares.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::config(path, format!("proportions sum to {sum}, expected 1")));
    }
    Ok(())
}

impl PopulationConfig {
    /// The bundled default: full-scale N, Table-style moment, wage and
    /// variance parameters, and an illustrative proportions table.
    pub fn bundled() -> Self {
        serde_json::from_str(DEFAULT_CONFIG).expect("bundled population config is valid")
    }

    /// Bundled defaults at the given population size.
    pub fn with_n(n: usize) -> Self {
        Self {
            n,
            ..Self::bundled()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config("population", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn resolve(&self) -> Result<ResolvedConfig> {
        if self.n == 0 {
            return Err(Error::config("n", "population size must be positive"));
        }
        let size_groups = dense(&self.proportions.size_groups, &SIZE_GROUPS, "proportions.size_groups")?;
        check_shares(&size_groups, "proportions.size_groups")?;

        check_unknown(
            self.proportions.industry_within_size.keys(),
            &SIZE_GROUPS,
            "proportions.industry_within_size",
        )?;
        let mut industry_within_size = [[0.0; 18]; 14];
        for (g, label) in SIZE_GROUPS.iter().enumerate() {
            let path = format!("proportions.industry_within_size.{label}");
            let row = self
                .proportions
                .industry_within_size
                .get(*label)
                .ok_or_else(|| Error::config(&path, "missing parameter table entry"))?;
            industry_within_size[g] = dense(row, &INDUSTRIES, &path)?;
            check_shares(&industry_within_size[g], &path)?;
        }

        let state = match &self.proportions.state {
            StateProportions::Shared(map) => {
                let row = dense(map, &STATES, "proportions.state")?;
                check_shares(&row, "proportions.state")?;
                vec![row]
            }
            StateProportions::ByCell(map) => {
                let mut rows = Vec::with_capacity(14 * 18);
                for g in SIZE_GROUPS {
                    let by_ind = map.get(g).ok_or_else(|| {
                        Error::config(format!("proportions.state.{g}"), "missing parameter table entry")
                    })?;
                    for d in INDUSTRIES {
                        let path = format!("proportions.state.{g}.{d}");
                        let m = by_ind
                            .get(d)
                            .ok_or_else(|| Error::config(&path, "missing parameter table entry"))?;
                        let row = dense(m, &STATES, &path)?;
                        check_shares(&row, &path)?;
                        rows.push(row);
                    }
                }
                rows
            }
        };

        let mut moments = [(MomentSpec::new(0.0, 1.0, 0.0, 0.0), MomentSpec::new(0.0, 1.0, 0.0, 0.0), 0.0); 14];
        let mut seen = [false; 14];
        for row in &self.moments {
            let g = group_index(&row.group).ok_or_else(|| Error::config(format!("moments.{}", row.group), "unknown size group"))?;
            moments[g] = (row.frame, row.reported, row.covariance);
            seen[g] = true;
        }
        if let Some(g) = seen.iter().position(|s| !s) {
            return Err(Error::config(format!("moments.{}", SIZE_GROUPS[g]), "missing parameter table entry"));
        }

        let wage_factors = dense(&self.wage_factors, &INDUSTRIES, "wage_factors")?;
        let mut v_e = [0.0; 14];
        let mut v_s = [0.0; 14];
        let mut seen = [false; 14];
        for row in &self.wage_variances {
            let g = group_index(&row.group)
                .ok_or_else(|| Error::config(format!("wage_variances.{}", row.group), "unknown size group"))?;
            if row.v_e < 0.0 || row.v_s < 0.0 {
                return Err(Error::config(format!("wage_variances.{}", row.group), "variances must be non-negative"));
            }
            v_e[g] = row.v_e;
            v_s[g] = row.v_s;
            seen[g] = true;
        }
        if let Some(g) = seen.iter().position(|s| !s) {
            return Err(Error::config(format!("wage_variances.{}", SIZE_GROUPS[g]), "missing parameter table entry"));
        }

        let overtime_probabilities = dense(&self.overtime.probabilities, &INDUSTRIES, "overtime.probabilities")?;
        if overtime_probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::config("overtime.probabilities", "probabilities must lie in [0, 1]"));
        }
        if self.overtime.mean_factor < 0.0 {
            return Err(Error::config("overtime.mean_factor", "must be non-negative"));
        }
        let me = &self.measurement_error;
        if me.factor_variance < 0.0 {
            return Err(Error::config("measurement_error.factor_variance", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&me.contamination_rate) {
            return Err(Error::config("measurement_error.contamination_rate", "must lie in [0, 1]"));
        }
        if me.contamination_low > me.contamination_high {
            return Err(Error::config("measurement_error.contamination_low", "exceeds contamination_high"));
        }

        Ok(ResolvedConfig {
            n: self.n,
            size_groups,
            industry_within_size,
            state,
            moments,
            wage_factors,
            v_e,
            v_s,
            awe: self.average_weekly_earnings,
            overtime_probabilities,
            overtime_mean_factor: self.overtime.mean_factor,
            me: me.clone(),
            variance_as_sd: self.variance_as_sd,
            swap_wage_variances: self.swap_wage_variances,
        })
    }
}

pub fn group_index(label: &str) -> Option<usize> {
    SIZE_GROUPS.iter().position(|g| *g == label)
}
