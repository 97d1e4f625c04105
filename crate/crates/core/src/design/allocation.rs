use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Stratum;
use crate::error::{Error, Result};
use crate::population::{INDUSTRIES, STATES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Domain {
    National,
    Industry(u8),
    State(u8),
}

impl Domain {
    pub fn contains(&self, s: &Stratum) -> bool {
        match *self {
            Domain::National => true,
            Domain::Industry(d) => s.key.industry == d,
            Domain::State(st) => s.key.state == st,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Domain::National => write!(f, "national"),
            Domain::Industry(d) => write!(f, "industry:{}", INDUSTRIES[d as usize]),
            Domain::State(s) => write!(f, "state:{}", STATES[s as usize]),
        }
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config("constraints.domain", format!("unknown domain {s:?}"));
        match s.split_once(':') {
            None if s == "national" => Ok(Domain::National),
            Some(("industry", d)) => INDUSTRIES
                .iter()
                .position(|i| *i == d)
                .map(|i| Domain::Industry(i as u8))
                .ok_or_else(bad),
            Some(("state", st)) => STATES
                .iter()
                .position(|i| *i == st)
                .map(|i| Domain::State(i as u8))
                .ok_or_else(bad),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for Domain {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Domain> for String {
    fn from(d: Domain) -> String {
        d.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub domain: Domain,
    pub target_rse: f64,
}

impl ConstraintSpec {
    pub fn new(domain: Domain, target_rse: f64) -> Self {
        Self { domain, target_rse }
    }

    /// National RSE plus one constraint per industry and per state.
    pub fn standard(national: f64, industry: f64, state: f64) -> Vec<Self> {
        let mut out = vec![Self::new(Domain::National, national)];
        out.extend((0..18).map(|d| Self::new(Domain::Industry(d), industry)));
        out.extend((0..8).map(|s| Self::new(Domain::State(s), state)));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocationOptions {
    pub min_n: usize,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for AllocationOptions {
    fn default() -> Self {
        Self {
            min_n: 6,
            tolerance: 1e-10,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    /// Sample size per stratum, aligned with the strata slice.
    pub n_h: Vec<usize>,
    pub total_n: usize,
    /// Continuous optimum before rounding.
    pub continuous: Vec<f64>,
    pub iterations: usize,
}

/// Anticipated stratified-SRS RSE of the earnings total for each constraint;
/// `None` for constraints whose domain has no strata or a zero total.
pub fn anticipated_rse(strata: &[Stratum], n_h: &[usize], constraints: &[ConstraintSpec]) -> Vec<Option<f64>> {
    constraints
        .iter()
        .map(|c| {
            let (mut v, mut y, mut any) = (0.0, 0.0, false);
            for (s, &n) in strata.iter().zip(n_h) {
                if c.domain.contains(s) {
                    any = true;
                    y += s.y_total;
                    let big_n = s.n_pop() as f64;
                    v += big_n * big_n * s.s_h * s.s_h * (1.0 / n as f64 - 1.0 / big_n);
                }
            }
            (any && y != 0.0).then(|| v.max(0.0).sqrt() / y.abs())
        })
        .collect()
}

struct Problem {
    lo: Vec<f64>,
    hi: Vec<f64>,
    fixed: Vec<bool>,
    // per stratum: (constraint index, N_h² S_h²)
    members: Vec<Vec<(usize, f64)>>,
    // per constraint: allowed variance (rse·Y)², rse, |Y|
    target_var: Vec<f64>,
    rse: Vec<f64>,
    y_abs: Vec<f64>,
    // per constraint: c_j = T_j + Σ A_h / N_h over sampled strata
    capacity: Vec<f64>,
}

impl Problem {
    fn variances(&self, n: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.target_var.len()];
        for (h, mem) in self.members.iter().enumerate() {
            if self.fixed[h] {
                continue;
            }
            for &(j, a) in mem {
                v[j] += a * (1.0 / n[h] - 1.0 / self.hi[h]);
            }
        }
        v
    }

    fn feasible_j(&self, j: usize, var: f64) -> bool {
        var.max(0.0).sqrt() <= (self.rse[j] + 1e-12) * self.y_abs[j]
    }
}

/// Slack on normalized constraints accepted by the stationary stopping test.
const NEAR_FEASIBLE: f64 = 1e-3;
/// Relative per-iteration change in Σ n_h below which the iterate counts as
/// stationary.
const STATIONARY: f64 = 1e-8;

/// Minimum total sample size meeting every RSE constraint on the earnings
/// total, by Chromy's multiplier iteration for Bethel's convex program.
///
/// Strata flagged take-all, or with `N_h ≤ min_n`, are fully enumerated. The
/// continuous optimum is rounded up, repaired if a constraint is still
/// violated, then trimmed greedily while every constraint stays satisfied.
pub fn bethel_chromy_allocate(
    strata: &[Stratum],
    constraints: &[ConstraintSpec],
    opts: &AllocationOptions,
) -> Result<Allocation> {
    if let Some(c) = constraints.iter().find(|c| !(c.target_rse > 0.0) || !c.target_rse.is_finite()) {
        return Err(Error::InfeasibleConstraints(format!(
            "target RSE for {} must be positive, got {}",
            c.domain, c.target_rse
        )));
    }
    let h_count = strata.len();
    let mut lo = vec![0.0; h_count];
    let mut hi = vec![0.0; h_count];
    let mut fixed = vec![false; h_count];
    for (h, s) in strata.iter().enumerate() {
        let n = s.n_pop() as f64;
        hi[h] = n;
        fixed[h] = s.take_all || s.n_pop() <= opts.min_n;
        lo[h] = if fixed[h] { n } else { opts.min_n as f64 };
    }

    let mut members = vec![Vec::new(); h_count];
    let mut target_var = Vec::new();
    let mut rse = Vec::new();
    let mut y_abs = Vec::new();
    let mut capacity = Vec::new();
    for c in constraints {
        let inside: Vec<usize> = (0..h_count).filter(|&h| c.domain.contains(&strata[h])).collect();
        if inside.is_empty() {
            continue;
        }
        let y: f64 = inside.iter().map(|&h| strata[h].y_total).sum();
        let j = target_var.len();
        let t = (c.target_rse * y).powi(2);
        let mut cap = t;
        let mut any = false;
        for &h in &inside {
            let s = &strata[h];
            let a = (s.n_pop() as f64).powi(2) * s.s_h * s.s_h;
            if !fixed[h] && a > 0.0 {
                members[h].push((j, a));
                cap += a / hi[h];
                any = true;
            }
        }
        if !any {
            // nothing left to allocate in this domain; drop the constraint
            for m in members.iter_mut() {
                m.retain(|&(jj, _)| jj != j);
            }
            continue;
        }
        target_var.push(t);
        rse.push(c.target_rse);
        y_abs.push(y.abs());
        capacity.push(cap);
    }
    let problem = Problem {
        lo,
        hi,
        fixed,
        members,
        target_var,
        rse,
        y_abs,
        capacity,
    };
    let j_count = problem.target_var.len();

    // Chromy iteration on normalized constraints Σ (A_h / c_j) / n_h ≤ 1.
    let mut lambda = vec![1.0; j_count];
    let mut n = problem.lo.clone();
    let mut iterations = 0;
    let continuous_n = |lambda: &[f64], n: &mut [f64]| {
        for h in 0..h_count {
            if problem.fixed[h] {
                continue;
            }
            let s: f64 = problem.members[h]
                .iter()
                .map(|&(j, a)| lambda[j] * a / problem.capacity[j])
                .sum();
            n[h] = s.sqrt().clamp(problem.lo[h], problem.hi[h]);
        }
    };
    if j_count > 0 {
        let mut converged = false;
        let mut prev_total = f64::NAN;
        while iterations < opts.max_iter {
            iterations += 1;
            continuous_n(&lambda, &mut n);
            let mut g = vec![0.0; j_count];
            for h in 0..h_count {
                if problem.fixed[h] {
                    continue;
                }
                for &(j, a) in &problem.members[h] {
                    g[j] += a / problem.capacity[j] / n[h];
                }
            }
            let mut max_change: f64 = 0.0;
            let mut total = 0.0;
            for j in 0..j_count {
                let next = lambda[j] * g[j] * g[j];
                max_change = max_change.max((next - lambda[j]).abs());
                total += next;
                lambda[j] = next;
            }
            if !total.is_finite() {
                break;
            }
            // Near-degenerate multipliers can decay like 1/k, and a constraint
            // whose strata sit at their bounds can creep forever, while the
            // objective is already stationary; rounding and repair restore
            // exact feasibility afterwards.
            let n_total: f64 = n.iter().sum();
            let feasible = g.iter().all(|&gj| gj <= 1.0 + NEAR_FEASIBLE);
            let stationary = ((n_total - prev_total) / n_total).abs() <= STATIONARY;
            if max_change <= opts.tolerance * total.max(f64::MIN_POSITIVE) || (feasible && stationary) {
                converged = true;
                break;
            }
            prev_total = n_total;
        }
        if !converged {
            return Err(Error::NoConvergence {
                what: "Bethel-Chromy multiplier iteration",
                iterations,
            });
        }
        continuous_n(&lambda, &mut n);
    }
    let continuous = n.clone();

    let mut n_int: Vec<f64> = (0..h_count)
        .map(|h| (n[h] - 1e-9).ceil().clamp(problem.lo[h], problem.hi[h]))
        .collect();
    let mut var = problem.variances(&n_int);

    // repair: add units where they buy the most relative variance
    loop {
        let violated: Vec<usize> = (0..j_count).filter(|&j| !problem.feasible_j(j, var[j])).collect();
        if violated.is_empty() {
            break;
        }
        let best = (0..h_count)
            .filter(|&h| !problem.fixed[h] && n_int[h] < problem.hi[h])
            .map(|h| {
                let gain: f64 = problem.members[h]
                    .iter()
                    .filter(|(j, _)| violated.contains(j))
                    .map(|&(j, a)| a * (1.0 / n_int[h] - 1.0 / (n_int[h] + 1.0)) / problem.target_var[j].max(f64::MIN_POSITIVE))
                    .sum();
                (h, gain)
            })
            .filter(|(_, g)| *g > 0.0)
            .max_by(|a, b| a.1.total_cmp(&b.1));
        let Some((h, _)) = best else {
            return Err(Error::InfeasibleConstraints(
                "constraints cannot be met even by a census of sampled strata".into(),
            ));
        };
        for &(j, a) in &problem.members[h] {
            var[j] += a * (1.0 / (n_int[h] + 1.0) - 1.0 / n_int[h]);
        }
        n_int[h] += 1.0;
    }

    // trim: drop units while every constraint holds, keeping the most slack
    loop {
        let mut best: Option<(usize, f64)> = None;
        for h in 0..h_count {
            if problem.fixed[h] || n_int[h] <= problem.lo[h] {
                continue;
            }
            let mut worst: f64 = 0.0;
            let mut ok = true;
            for &(j, a) in &problem.members[h] {
                let v = var[j] + a * (1.0 / (n_int[h] - 1.0) - 1.0 / n_int[h]);
                if !problem.feasible_j(j, v) {
                    ok = false;
                    break;
                }
                worst = worst.max(v / problem.target_var[j].max(f64::MIN_POSITIVE));
            }
            if ok && best.is_none_or(|(_, w)| worst < w) {
                best = Some((h, worst));
            }
        }
        let Some((h, _)) = best else { break };
        for &(j, a) in &problem.members[h] {
            var[j] += a * (1.0 / (n_int[h] - 1.0) - 1.0 / n_int[h]);
        }
        n_int[h] -= 1.0;
    }

    let n_h: Vec<usize> = n_int.iter().map(|&v| v as usize).collect();
    Ok(Allocation {
        total_n: n_h.iter().sum(),
        n_h,
        continuous,
        iterations,
    })
}
