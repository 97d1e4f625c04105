use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bigdata::SelectionModel;
use crate::design::{ConstraintSpec, DesignKind, Domain};
use crate::error::{Error, Result};
use crate::estimators::{DrVariant, EstimatorId};
use crate::population::{load_population, synthesize_population, PopulationConfig, PopulationFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Missingness {
    #[serde(rename = "SAR", alias = "sar")]
    Sar,
    #[serde(rename = "SNAR", alias = "snar")]
    Snar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub missingness: Missingness,
    #[serde(default)]
    pub measurement_error: bool,
}

impl ScenarioSpec {
    pub const GRID: [ScenarioSpec; 4] = [
        ScenarioSpec {
            missingness: Missingness::Sar,
            measurement_error: false,
        },
        ScenarioSpec {
            missingness: Missingness::Sar,
            measurement_error: true,
        },
        ScenarioSpec {
            missingness: Missingness::Snar,
            measurement_error: false,
        },
        ScenarioSpec {
            missingness: Missingness::Snar,
            measurement_error: true,
        },
    ];

    pub fn name(&self) -> String {
        let m = match self.missingness {
            Missingness::Sar => "sar",
            Missingness::Snar => "snar",
        };
        format!("{m}_{}", if self.measurement_error { "me" } else { "no_me" })
    }
}

impl fmt::Display for ScenarioSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scenarios {
    One(ScenarioSpec),
    Many(Vec<ScenarioSpec>),
}

impl Scenarios {
    pub fn specs(&self) -> Vec<ScenarioSpec> {
        match self {
            Scenarios::One(s) => vec![*s],
            Scenarios::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesizeSpec {
    pub n: Option<usize>,
    pub seed: Option<u64>,
    /// Population generator config; the bundled default when absent.
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PopulationSource {
    Synthesize(SynthesizeSpec),
    Load(PathBuf),
}

impl Default for PopulationSource {
    fn default() -> Self {
        PopulationSource::Synthesize(SynthesizeSpec::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintEntry {
    /// `national`, `industry`, `state`, or one level such as `industry:C`.
    pub domain: String,
    pub rse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Desk,
    Full,
}

impl Scale {
    pub fn population_size(self) -> usize {
        match self {
            Scale::Desk => 90_000,
            Scale::Full => 900_000,
        }
    }

    pub fn replicates(self) -> usize {
        match self {
            Scale::Desk => 200,
            Scale::Full => 2_000,
        }
    }
}

fn default_scenarios() -> Scenarios {
    Scenarios::One(ScenarioSpec::GRID[0])
}

fn default_designs() -> Vec<DesignKind> {
    DesignKind::ALL.to_vec()
}

fn default_constraints() -> Vec<ConstraintEntry> {
    [("national", 0.015), ("industry", 0.05), ("state", 0.05)]
        .iter()
        .map(|&(d, r)| ConstraintEntry {
            domain: d.into(),
            rse: r,
        })
        .collect()
}

fn default_min_n() -> usize {
    6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_scenarios")]
    pub scenario: Scenarios,
    /// Overrides the selection law implied by the missingness setting.
    #[serde(default)]
    pub selection_model: Option<SelectionModel>,
    #[serde(default = "default_designs")]
    pub designs: Vec<DesignKind>,
    pub estimators: Vec<EstimatorId>,
    #[serde(default)]
    pub replicates: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub population: PopulationSource,
    #[serde(default = "default_constraints")]
    pub constraints: Vec<ConstraintEntry>,
    #[serde(default = "default_min_n")]
    pub min_stratum_n: usize,
    #[serde(default)]
    pub dr_variant: DrVariant,
    #[serde(default)]
    pub mi_calibrated_weights: bool,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_value(serde_json::from_str(text).map_err(|e| Error::config("<config>", e.to_string()))?)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        let cfg: Self = serde_json::from_value(value).map_err(|e| Error::config("<config>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn replicates(&self) -> usize {
        self.replicates.unwrap_or(Scale::Desk.replicates())
    }

    /// Sets population size and replicate count from a scale preset.
    pub fn apply_scale(&mut self, scale: Scale) {
        self.replicates = Some(scale.replicates());
        if let PopulationSource::Synthesize(s) = &mut self.population {
            s.n = Some(scale.population_size());
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.estimators.is_empty() {
            return Err(Error::config("estimators", "roster is empty"));
        }
        if self.replicates == Some(0) {
            return Err(Error::config("replicates", "must be at least 1"));
        }
        if self.scenario.specs().is_empty() {
            return Err(Error::config("scenario", "no scenarios given"));
        }
        for &id in &self.estimators {
            if let Some(d) = id.design() {
                if !self.designs.contains(&d) {
                    return Err(Error::config(
                        "estimators",
                        format!("{id} needs the {} design, which is not listed in designs", d.name()),
                    ));
                }
            }
        }
        if let Some(m) = &self.selection_model {
            for s in self.scenario.specs() {
                if s.missingness == Missingness::Snar && m.is_sar() {
                    return Err(Error::config(
                        "selection_model.phi",
                        "SNAR scenario needs a nonzero log-earnings coefficient",
                    ));
                }
                if s.missingness == Missingness::Sar && !m.is_sar() {
                    return Err(Error::config(
                        "selection_model.phi",
                        "SAR scenario needs a zero log-earnings coefficient",
                    ));
                }
            }
        }
        self.constraint_specs()?;
        Ok(())
    }

    pub fn selection_model(&self, spec: &ScenarioSpec) -> SelectionModel {
        self.selection_model.clone().unwrap_or_else(|| match spec.missingness {
            Missingness::Sar => SelectionModel::sar(),
            Missingness::Snar => SelectionModel::snar(),
        })
    }

    pub fn constraint_specs(&self) -> Result<Vec<ConstraintSpec>> {
        let mut out = Vec::new();
        for (k, c) in self.constraints.iter().enumerate() {
            if !(c.rse > 0.0) || !c.rse.is_finite() {
                return Err(Error::config(format!("constraints[{k}].rse"), "must be positive"));
            }
            match c.domain.as_str() {
                "industry" => out.extend((0..18).map(|d| ConstraintSpec::new(Domain::Industry(d), c.rse))),
                "state" => out.extend((0..8).map(|s| ConstraintSpec::new(Domain::State(s), c.rse))),
                other => {
                    let domain: Domain = other.parse().map_err(|_| {
                        Error::config(format!("constraints[{k}].domain"), format!("unknown domain {other:?}"))
                    })?;
                    out.push(ConstraintSpec::new(domain, c.rse));
                }
            }
        }
        Ok(out)
    }

    /// Builds or loads the population. Relative paths resolve against
    /// `base_dir`.
    pub fn load_frame(&self, base_dir: Option<&Path>) -> Result<PopulationFrame> {
        let resolve = |p: &Path| match base_dir {
            Some(b) if p.is_relative() => b.join(p),
            _ => p.to_path_buf(),
        };
        match &self.population {
            PopulationSource::Load(path) => load_population(&resolve(path)),
            PopulationSource::Synthesize(s) => {
                let mut cfg = match &s.config {
                    Some(p) => PopulationConfig::load(&resolve(p))?,
                    None => PopulationConfig::bundled(),
                };
                cfg.n = s.n.unwrap_or(Scale::Desk.population_size());
                let seed = s.seed.unwrap_or(cfg.seed);
                synthesize_population(&cfg, seed)
            }
        }
    }
}

/// Applies `key.path=value` overrides to a parsed JSON document. Values are
/// read as JSON when they parse, otherwise as strings.
pub fn apply_overrides(doc: &mut serde_json::Value, overrides: &[String]) -> Result<()> {
    for o in overrides {
        let (key, raw) = o
            .split_once('=')
            .ok_or_else(|| Error::config(o.clone(), "override must look like key=value"))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
        let mut cur = &mut *doc;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let obj = cur
                .as_object_mut()
                .ok_or_else(|| Error::config(key, format!("`{}` is not an object", parts[..i].join("."))))?;
            if i + 1 == parts.len() {
                obj.insert(part.to_string(), value.clone());
                break;
            }
            cur = obj
                .entry(part.to_string())
                .or_insert_with(|| serde_json::Value::Object(Default::default()));
        }
    }
    Ok(())
}
