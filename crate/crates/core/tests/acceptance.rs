//! Acceptance suite. Runs every criterion in order and prints one line per
//! criterion:
//!
//! ```text
//! [PASS] 5  unbiasedness of design-based estimators (desk) | ...
//! ```
//!
//! Criteria listed in [`DOCUMENTED_GAPS`] are still evaluated and reported;
//! a FAIL there does not fail the run. Any other FAIL exits non-zero.
//!
//! `cargo test --release --test acceptance -- --full-shape` additionally
//! runs the long full-scale sign and rank check (criterion 12).
//! `-- --reference-population PATH` runs the full-scale part of criterion 10
//! on an ingested population CSV.

mod common;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use common::{calibration_brute_force, greg_closed_form, irls_logistic, GridProblem};
use nonprob::bigdata::{draw_big_dataset, selection_probabilities, BigDataset, SelectionModel};
use nonprob::design::{
    bethel_chromy_allocate, build_design_frame, draw_stratified_sample, stratify, AllocationOptions, ConstraintSpec,
    DesignKind, Domain,
};
use nonprob::estimators::{dr_total, DrVariant, ValueSource};
use nonprob::linalg::Design;
use nonprob::population::{
    load_population, MomentSpec, PairGenerator, PopulationConfig, PopulationFrame, UnitRecord,
    SIZE_GROUPS,
};
use nonprob::rng::stream;
use nonprob::simulation::{run_config, ScenarioConfig, ScenarioResult};
use nonprob::weighting::{chi_square_calibrate, fit_logistic_weighted, CalibrationProblem, LogisticOptions};
use rand::Rng as _;

// Tolerances and bands, pinned.
const MOMENT_DRAWS: usize = 1_000_000;
const MOMENT_BATCHES: usize = 100;
const MOMENT_SE_MULTIPLE: f64 = 3.0;
const MOMENT_ROW_SECONDS: f64 = 120.0;
/// 0.999 quantile of χ² with 126 degrees of freedom (14 rows x 9 moments).
const MOMENT_CHI2_LIMIT: f64 = 181.0;
const CALIBRATION_TOL: f64 = 1e-8;
const CALIBRATION_CASES: usize = 300;
const LOGISTIC_TOL: f64 = 1e-6;
const LOGISTIC_CASES: usize = 300;
const ALLOCATION_CASES: usize = 300;
const DESK_REPLICATES: usize = 200;
const UNBIASED_RB: f64 = 0.005;
const ORDER_MARGIN: f64 = 0.10;
const ME_RB_LOW: f64 = -0.20;
const ME_RB_HIGH: f64 = -0.05;
const ME_CORRECTED_RB: f64 = 0.02;
const SNAR_KW_RB_MAX: f64 = -0.015;
const SNAR_KW_EARN_RB: f64 = 0.01;
const DR_RB: f64 = 0.01;
const SAVING_LOW: f64 = 0.35;
const SAVING_HIGH: f64 = 0.45;
const FULL_SINGLE_N: f64 = 7_715.0;
const FULL_SINGLE_BAND: f64 = 0.10;
const DESK_RUNTIME_MINUTES: f64 = 30.0;

/// Criteria whose FAIL is analysed in the README and does not fail the run.
const DOCUMENTED_GAPS: [&str; 3] = ["1", "7", "10"];

#[derive(Debug, Clone, Copy, PartialEq)]
enum Verdict {
    Pass,
    Fail,
    Skip,
}

struct Ledger {
    lines: Vec<(String, Verdict)>,
}

impl Ledger {
    fn record(&mut self, id: &str, title: &str, verdict: Verdict, detail: impl AsRef<str>) {
        let tag = match verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Skip => "SKIP",
        };
        println!("[{tag}] {id:<3} {title} | {}", detail.as_ref());
        self.lines.push((id.to_string(), verdict));
    }

    fn check(&mut self, id: &str, title: &str, ok: bool, detail: impl AsRef<str>) {
        self.record(id, title, if ok { Verdict::Pass } else { Verdict::Fail }, detail);
    }
}

fn pct(v: f64) -> String {
    format!("{:.2}%", v * 100.0)
}

// --- 1 -------------------------------------------------------------------

fn sample_moments(x: &[f64], y: &[f64]) -> [f64; 9] {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut m2x, mut m3x, mut m4x, mut m2y, mut m3y, mut m4y, mut cxy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        let (dx2, dy2) = (dx * dx, dy * dy);
        m2x += dx2;
        m3x += dx2 * dx;
        m4x += dx2 * dx2;
        m2y += dy2;
        m3y += dy2 * dy;
        m4y += dy2 * dy2;
        cxy += dx * dy;
    }
    let (m2x, m3x, m4x, m2y, m3y, m4y, cxy) = (m2x / n, m3x / n, m4x / n, m2y / n, m3y / n, m4y / n, cxy / n);
    [
        mx,
        m2x,
        m3x / m2x.powf(1.5),
        m4x / (m2x * m2x) - 3.0,
        my,
        m2y,
        m3y / m2y.powf(1.5),
        m4y / (m2y * m2y) - 3.0,
        cxy,
    ]
}

fn criterion_1(ledger: &mut Ledger) {
    let cfg = PopulationConfig::bundled().resolve().expect("bundled config");
    let names = ["mean_x", "var_x", "skew_x", "kurt_x", "mean_y", "var_y", "skew_y", "kurt_y", "cov"];
    let mut worst = (0.0f64, String::new());
    let mut slowest = 0.0f64;
    let mut failures = Vec::new();
    let mut chi2 = 0.0;
    for (g, (fx, fy, cov)) in cfg.moments.iter().enumerate() {
        let start = Instant::now();
        let gen = PairGenerator::new(*fx, *fy, *cov).expect("pair generator");
        let (x, y) = gen.generate(MOMENT_DRAWS, &mut stream(0xB1, &[g as u64]));
        let target = targets(fx, fy, *cov);
        let full = sample_moments(&x, &y);
        let size = MOMENT_DRAWS / MOMENT_BATCHES;
        let batches: Vec<[f64; 9]> = (0..MOMENT_BATCHES)
            .map(|b| sample_moments(&x[b * size..(b + 1) * size], &y[b * size..(b + 1) * size]))
            .collect();
        for k in 0..9 {
            let mean = batches.iter().map(|s| s[k]).sum::<f64>() / MOMENT_BATCHES as f64;
            let var = batches.iter().map(|s| (s[k] - mean).powi(2)).sum::<f64>() / (MOMENT_BATCHES as f64 - 1.0);
            let se = (var / MOMENT_BATCHES as f64).sqrt();
            let z = (full[k] - target[k]).abs() / se;
            chi2 += z * z;
            if z > worst.0 {
                worst = (z, format!("{} {}", SIZE_GROUPS[g], names[k]));
            }
            if z > MOMENT_SE_MULTIPLE {
                failures.push(format!("{} {} z={z:.2}", SIZE_GROUPS[g], names[k]));
            }
        }
        slowest = slowest.max(start.elapsed().as_secs_f64());
    }
    let ok = failures.is_empty() && slowest < MOMENT_ROW_SECONDS;
    ledger.check(
        "1",
        "employment pair moment fidelity",
        ok,
        format!(
            "14 rows x 9 moments, worst |z| = {:.2} ({}), slowest row {:.1}s{}",
            worst.0,
            worst.1,
            slowest,
            if failures.is_empty() { String::new() } else { format!(", over {MOMENT_SE_MULTIPLE} SE: {failures:?}") }
        ),
    );
    ledger.check(
        "1b",
        "employment pair moments, pooled deviation",
        chi2 <= MOMENT_CHI2_LIMIT,
        format!("sum of z^2 over 126 moments = {chi2:.1} (limit {MOMENT_CHI2_LIMIT})"),
    );
}

fn targets(fx: &MomentSpec, fy: &MomentSpec, cov: f64) -> [f64; 9] {
    [
        fx.mean,
        fx.variance,
        fx.skewness,
        fx.kurtosis,
        fy.mean,
        fy.variance,
        fy.skewness,
        fy.kurtosis,
        cov,
    ]
}

// --- 2 -------------------------------------------------------------------

fn criterion_2(ledger: &mut Ledger) {
    let mut rng = stream(0xCA1, &[]);
    let mut worst = 0.0f64;
    let mut solved = 0;
    for _ in 0..CALIBRATION_CASES {
        let n = rng.random_range(2..=5usize);
        let p = rng.random_range(1..n.min(3) + 1);
        let d: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..30.0)).collect();
        let q: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { rng.random_range(0.5..2.0) }).collect();
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let mut r = vec![1.0];
                r.extend((1..p).map(|_| rng.random_range(-10.0..10.0)));
                r
            })
            .collect();
        let totals: Vec<f64> = (0..p)
            .map(|j| x.iter().zip(&d).map(|(r, d)| r[j] * d).sum::<f64>() * rng.random_range(0.8..1.25))
            .collect();
        let Some(closed) = greg_closed_form(&d, &x, &totals, &q) else { continue };
        let design = Design::from_rows(&x);
        let Ok(cal) = chi_square_calibrate(&CalibrationProblem {
            d: &d,
            x: &design,
            totals: &totals,
            q: Some(&q),
        }) else {
            continue;
        };
        let brute = calibration_brute_force(&d, &x, &totals, &q);
        for ((w, c), b) in cal.weights.iter().zip(&closed).zip(&brute) {
            worst = worst.max((w - c).abs() / (1.0 + c.abs())).max((w - b).abs() / (1.0 + b.abs()));
        }
        solved += 1;
    }
    // two units: d = (1, 1), x = (1, 2), X = 5 → 3 + 5λ = 5, λ = 0.4
    let x = Design::from_rows(&[vec![1.0], vec![2.0]]);
    let hand = chi_square_calibrate(&CalibrationProblem {
        d: &[1.0, 1.0],
        x: &x,
        totals: &[5.0],
        q: None,
    })
    .expect("two-unit case");
    let hand_ok = (hand.weights[0] - 1.4).abs() < CALIBRATION_TOL && (hand.weights[1] - 1.8).abs() < CALIBRATION_TOL;
    ledger.check(
        "2",
        "calibration vs closed form and brute-force minimizer",
        worst <= CALIBRATION_TOL && hand_ok && solved >= CALIBRATION_CASES * 9 / 10,
        format!("{solved} problems (n <= 5), max relative deviation {worst:.2e}, two-unit case {hand_ok}"),
    );
}

// --- 3 -------------------------------------------------------------------

fn criterion_3(ledger: &mut Ledger) {
    let mut rng = stream(0x1061, &[]);
    let mut worst = 0.0f64;
    let (mut fitted, mut weighted) = (0, 0);
    for case in 0..LOGISTIC_CASES {
        let n = rng.random_range(10..=100usize);
        let p = rng.random_range(2..=3usize);
        let beta: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let mut r = vec![1.0];
                r.extend((1..p).map(|_| rng.random_range(-2.0..2.0)));
                r
            })
            .collect();
        let y: Vec<bool> = x
            .iter()
            .map(|r| {
                let eta: f64 = r.iter().zip(&beta).map(|(a, b)| a * b).sum();
                rng.random::<f64>() < 1.0 / (1.0 + (-eta).exp())
            })
            .collect();
        let is_weighted = case % 2 == 1;
        let w: Vec<f64> = (0..n).map(|_| if is_weighted { rng.random_range(0.5..20.0) } else { 1.0 }).collect();
        let Some(oracle) = irls_logistic(&y, &x, &w) else { continue };
        if oracle.iter().any(|b| b.abs() > 15.0) {
            continue; // near-separated draw
        }
        let ours = fit_logistic_weighted(&y, &Design::from_rows(&x), &w, &LogisticOptions::default());
        let Ok(ours) = ours else { continue };
        for (a, b) in ours.iter().zip(&oracle) {
            worst = worst.max((a - b).abs());
        }
        fitted += 1;
        weighted += usize::from(is_weighted);
    }
    ledger.check(
        "3",
        "weighted logistic fit vs independent IRLS",
        worst <= LOGISTIC_TOL && fitted >= LOGISTIC_CASES * 9 / 10,
        format!("{fitted} datasets ({weighted} weighted), max coefficient deviation {worst:.2e}"),
    );
}

// --- 4 -------------------------------------------------------------------

fn criterion_4(ledger: &mut Ledger) {
    let mut rng = stream(0xA11, &[]);
    let (mut matched, mut infeasible, mut cases) = (0, 0, 0);
    let mut mismatches = Vec::new();
    for _ in 0..ALLOCATION_CASES {
        let h = rng.random_range(2..=3usize);
        let n_pop: Vec<usize> = (0..h).map(|_| rng.random_range(3..=60usize)).collect();
        let p = GridProblem {
            y: n_pop.iter().map(|n| *n as f64 * rng.random_range(200.0..3_000.0)).collect(),
            s: (0..h).map(|_| rng.random_range(10.0..800.0)).collect(),
            industry: (0..h).map(|_| rng.random_range(0..2u8)).collect(),
            take_all: (0..h).map(|_| rng.random_bool(0.1)).collect(),
            n_pop,
        };
        let c = vec![
            ConstraintSpec::new(Domain::National, rng.random_range(0.01..0.2)),
            ConstraintSpec::new(Domain::Industry(0), rng.random_range(0.02..0.4)),
            ConstraintSpec::new(Domain::Industry(1), rng.random_range(0.02..0.4)),
        ];
        let a = bethel_chromy_allocate(&p.strata(), &c, &AllocationOptions::default()).expect("allocation");
        let grid = p.grid_minimum(&c, 6);
        cases += 1;
        if !p.is_feasible(&a.n_h, &c) {
            infeasible += 1;
        }
        if grid == Some(a.total_n) {
            matched += 1;
        } else if mismatches.len() < 3 {
            mismatches.push(format!("{:?} vs grid {:?}", a.total_n, grid));
        }
    }
    ledger.check(
        "4",
        "allocation vs exhaustive grid search",
        matched == cases && infeasible == 0,
        format!("{matched}/{cases} totals match, {infeasible} infeasible{}", if mismatches.is_empty() { String::new() } else { format!(", e.g. {mismatches:?}") }),
    );
}

// --- 5 to 8, 10 ----------------------------------------------------------

fn desk_config(scenario: &str, estimators: &[&str], replicates: usize) -> ScenarioConfig {
    let json = serde_json::json!({
        "scenario": serde_json::from_str::<serde_json::Value>(scenario).unwrap(),
        "estimators": estimators,
        "replicates": replicates,
        "seed": 20_240_601u64,
    });
    ScenarioConfig::from_value(json).expect("desk config")
}

fn desk_run(frame: &PopulationFrame, scenario: &str, estimators: &[&str]) -> ScenarioResult {
    let cfg = desk_config(scenario, estimators, DESK_REPLICATES);
    run_config(frame, &cfg, None).expect("desk run").remove(0)
}

fn rb(r: &ScenarioResult, est: &str, var: &str) -> f64 {
    let row = r.row(est, var).unwrap_or_else(|| panic!("missing row {est}/{var}"));
    assert_eq!(row.n_failures, 0, "{est} failed in some replicates: {:?}", r.first_failures.get(est));
    row.rb
}

fn rrmse(r: &ScenarioResult, est: &str, var: &str) -> f64 {
    r.row(est, var).unwrap_or_else(|| panic!("missing row {est}/{var}")).rrmse
}

fn criteria_5_6(ledger: &mut Ledger, sar: &ScenarioResult) {
    let mut worst = (0.0f64, String::new());
    for est in ["greg", "rdi", "qr_ma", "sp", "sp_cal"] {
        for var in ["earn", "emp"] {
            let v = rb(sar, est, var);
            if v.abs() > worst.0 {
                worst = (v.abs(), format!("{est}/{var}"));
            }
        }
    }
    ledger.check(
        "5",
        "unbiasedness of GREG, RDI, QR-MA, SP, SP_Cal (desk, SAR, no ME)",
        worst.0 <= UNBIASED_RB,
        format!("max |RB| = {} at {} (limit {})", pct(worst.0), worst.1, pct(UNBIASED_RB)),
    );

    let (sp_cal, greg, ht) = (rrmse(sar, "sp_cal", "earn"), rrmse(sar, "greg", "earn"), rrmse(sar, "ht", "earn"));
    let (mi, rdi) = (rrmse(sar, "wgt_reg_mi", "ovt"), rrmse(sar, "rdi", "ovt"));
    let margin = |a: f64, b: f64| a <= b * (1.0 - ORDER_MARGIN);
    ledger.check(
        "6",
        "efficiency ordering (desk, SAR, no ME)",
        margin(sp_cal, greg) && margin(greg, ht) && margin(mi, rdi),
        format!(
            "earn RRMSE sp_cal {} < greg {} < ht {}; ovt RRMSE wgt_reg_mi {} < rdi {} (margin {})",
            pct(sp_cal),
            pct(greg),
            pct(ht),
            pct(mi),
            pct(rdi),
            pct(ORDER_MARGIN)
        ),
    );
}

fn criterion_7(ledger: &mut Ledger, me: &ScenarioResult) {
    let raw: Vec<(&str, f64)> = ["kw", "kwfr", "sp"].iter().map(|e| (*e, rb(me, e, "earn"))).collect();
    let cor: Vec<(&str, f64, f64)> = ["kw_cor", "kwfr_cor"]
        .iter()
        .map(|e| (*e, rb(me, e, "earn"), rrmse(me, e, "earn")))
        .collect();
    let greg = rrmse(me, "greg", "earn");
    let raw_ok = raw.iter().all(|(_, v)| (ME_RB_LOW..=ME_RB_HIGH).contains(v));
    let cor_ok = cor.iter().all(|(_, v, _)| v.abs() <= ME_CORRECTED_RB);
    let cost_ok = cor.iter().all(|(_, _, r)| *r > greg);
    let fmt_raw: Vec<String> = raw.iter().map(|(e, v)| format!("{e} {}", pct(*v))).collect();
    let fmt_cor: Vec<String> = cor.iter().map(|(e, v, r)| format!("{e} RB {} RRMSE {}", pct(*v), pct(*r))).collect();
    ledger.check(
        "7",
        "measurement-error signature (desk, SAR + ME)",
        raw_ok && cor_ok && cost_ok,
        format!(
            "uncorrected RB earn [{}] in band [{}, {}]: {raw_ok}; corrected [{}] |RB| <= {}: {cor_ok}; corrected RRMSE > greg {}: {cost_ok}",
            fmt_raw.join(", "),
            pct(ME_RB_LOW),
            pct(ME_RB_HIGH),
            fmt_cor.join(", "),
            pct(ME_CORRECTED_RB),
            pct(greg)
        ),
    );
}

fn criterion_8(ledger: &mut Ledger, snar: &ScenarioResult) {
    let kw = rb(snar, "kw", "earn");
    let kw_earn = rb(snar, "kw_earn", "earn");
    let sp = ["sp", "sp_cal"]
        .iter()
        .flat_map(|e| ["earn", "emp"].map(|v| rb(snar, e, v).abs()))
        .fold(0.0, f64::max);
    ledger.check(
        "8",
        "SNAR signature (desk, SNAR, no ME)",
        kw <= SNAR_KW_RB_MAX && kw_earn.abs() <= SNAR_KW_EARN_RB && sp <= UNBIASED_RB,
        format!("RB earn kw {} (<= {}), kw_earn {} (|.| <= {}), max |RB| sp/sp_cal {}", pct(kw), pct(SNAR_KW_RB_MAX), pct(kw_earn), pct(SNAR_KW_EARN_RB), pct(sp)),
    );
}

fn saving(r: &ScenarioResult) -> f64 {
    let mean = |d: &str| r.sample_sizes.iter().find(|s| s.design == d).expect("sample size row").mean_n;
    1.0 - mean("dual_screening") / mean("single")
}

fn criterion_10(ledger: &mut Ledger, sar: &ScenarioResult, reference: Option<PathBuf>) {
    let desk = saving(sar);
    let desk_ok = (SAVING_LOW..=SAVING_HIGH).contains(&desk);
    ledger.check(
        "10",
        "dual-frame sample-size saving (desk band)",
        desk_ok,
        format!("desk saving {} over {DESK_REPLICATES} replicates, band [{}, {}]", pct(desk), pct(SAVING_LOW), pct(SAVING_HIGH)),
    );
    match reference {
        None => ledger.record(
            "10",
            "full-scale allocation on the reference population",
            Verdict::Skip,
            "no --reference-population given",
        ),
        Some(path) => {
            let frame = load_population(&path).expect("reference population");
            let (single, dual) = full_scale_sizes(&frame, 20);
            let single_ok = (single - FULL_SINGLE_N).abs() <= FULL_SINGLE_BAND * FULL_SINGLE_N;
            let s = 1.0 - dual / single;
            ledger.check(
                "10",
                "full-scale allocation on the reference population",
                single_ok && (SAVING_LOW..=SAVING_HIGH).contains(&s),
                format!("single n {single:.0} (target {FULL_SINGLE_N} +/- {}), dual saving {}", pct(FULL_SINGLE_BAND), pct(s)),
            );
        }
    }
}

/// Single-frame total and mean dual-frame total over `draws` SAR big datasets.
fn full_scale_sizes(frame: &PopulationFrame, draws: u64) -> (f64, f64) {
    let c = ConstraintSpec::standard(0.015, 0.05, 0.05);
    let opts = AllocationOptions::default();
    let single = bethel_chromy_allocate(&stratify(frame, &(0..frame.n()).collect::<Vec<_>>()), &c, &opts)
        .expect("single allocation")
        .total_n as f64;
    let pi = selection_probabilities(frame, &SelectionModel::sar()).expect("selection");
    let dual: f64 = (0..draws)
        .map(|r| {
            let big = draw_big_dataset(&pi, false, &mut stream(0x10, &[r])).expect("big data");
            let df = build_design_frame(frame, Some(&big), DesignKind::DualScreening);
            bethel_chromy_allocate(&stratify(frame, &df.sampling), &c, &opts).expect("dual allocation").total_n as f64
        })
        .sum::<f64>()
        / draws as f64;
    (single, dual)
}

// --- 9 -------------------------------------------------------------------

/// Population mean of each variable within (industry, frame employment)
/// cells. Under SAR the selection probability is constant within a cell, so
/// this is the correct outcome model for B.
fn cell_means(frame: &PopulationFrame) -> BTreeMap<(u8, u32), [f64; 3]> {
    let mut acc: BTreeMap<(u8, u32), ([f64; 3], f64)> = BTreeMap::new();
    for u in frame.units() {
        let e = acc.entry((u.industry, u.frame_employment)).or_default();
        e.0[0] += u.earnings;
        e.0[1] += f64::from(u.reported_employment);
        e.0[2] += u.overtime;
        e.1 += 1.0;
    }
    acc.into_iter().map(|(k, (s, n))| (k, s.map(|v| v / n))).collect()
}

fn criterion_9(ledger: &mut Ledger, frame: &PopulationFrame) {
    let truth = frame.totals();
    let pi = selection_probabilities(frame, &SelectionModel::sar()).expect("selection");
    let c = ConstraintSpec::standard(0.015, 0.05, 0.05);
    let strata = stratify(frame, &(0..frame.n()).collect::<Vec<_>>());
    let alloc = bethel_chromy_allocate(&strata, &c, &AllocationOptions::default()).expect("allocation");
    let cells = cell_means(frame);
    let correct = |u: &UnitRecord| cells[&(u.industry, u.frame_employment)];

    // arms: (label, uses true π, uses correct ŷ)
    let arms = [("correct pi, wrong y", true, false), ("wrong pi, correct y", false, true), ("wrong pi, wrong y", false, false)];
    let mut sums = vec![[[0.0f64; 3]; 2]; arms.len()];
    for r in 0..DESK_REPLICATES as u64 {
        let big = draw_big_dataset(&pi, false, &mut stream(0xD9, &[r, 1])).expect("big data");
        let mut a = draw_stratified_sample(&strata, &alloc, &mut stream(0xD9, &[r, 2])).expect("sample");
        a.link(|i| big.contains(i));
        let b_mean = b_means(frame, &big);
        let wrong = move |_: &UnitRecord| b_mean;
        let flat = big.n_b() as f64 / frame.n() as f64;
        for (k, (_, true_pi, good_y)) in arms.iter().enumerate() {
            let pihat: Vec<f64> = big.members().iter().map(|&i| if *true_pi { pi[i] } else { flat }).collect();
            let predict: &dyn Fn(&UnitRecord) -> [f64; 3] = if *good_y { &correct } else { &wrong };
            for (v, variant) in [DrVariant::Dr1, DrVariant::Dr2].into_iter().enumerate() {
                let t = dr_total(frame, &a, &big, &pihat, predict, ValueSource::True, variant).expect("dr");
                for j in 0..3 {
                    sums[k][v][j] += (t[j] - truth[j]) / truth[j];
                }
            }
        }
    }
    let rbs: Vec<[[f64; 3]; 2]> = sums
        .iter()
        .map(|s| s.map(|v| v.map(|x| x / DESK_REPLICATES as f64)))
        .collect();
    let max_abs = |k: usize| rbs[k].iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let ok = max_abs(0) <= DR_RB && max_abs(1) <= DR_RB;
    ledger.check(
        "9",
        "double robustness of the DR estimator (desk, SAR)",
        ok,
        format!(
            "max |RB| over DR1/DR2 x earn/emp/ovt: {} {}, {} {} (limit {}); both wrong: {}",
            arms[0].0,
            pct(max_abs(0)),
            arms[1].0,
            pct(max_abs(1)),
            pct(DR_RB),
            pct(max_abs(2))
        ),
    );
}

fn b_means(frame: &PopulationFrame, big: &BigDataset) -> [f64; 3] {
    let mut s = [0.0; 3];
    for &i in big.members() {
        let u = frame.unit(i);
        s[0] += u.earnings;
        s[1] += f64::from(u.reported_employment);
        s[2] += u.overtime;
    }
    s.map(|v| v / big.n_b() as f64)
}

// --- 11 ------------------------------------------------------------------

fn criterion_11(ledger: &mut Ledger) {
    let dir = tempfile::tempdir().expect("tempdir");
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{"scenario": {"missingness": "SAR", "measurement_error": false},
            "designs": ["single", "dual_screening"],
            "estimators": ["ht", "greg", "kw", "sp_cal", "hd_mi", "auxdiv"],
            "replicates": 12, "seed": 77,
            "population": {"synthesize": {"n": 20000, "seed": 3}}}"#,
    )
    .expect("write config");
    let run = |threads: &str, out: &str| {
        let out = dir.path().join(out);
        let status = Command::new(env!("CARGO_BIN_EXE_nonprob"))
            .args(["simulate", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .args(["--threads", threads])
            .status()
            .expect("spawn nonprob");
        assert!(status.success(), "simulate exited with {status}");
        std::fs::read(out).expect("results")
    };
    let one = run("1", "a.csv");
    let four = run("4", "b.csv");
    let again = run("1", "c.csv");
    ledger.check(
        "11",
        "CLI determinism across --threads",
        one == four && one == again && !one.is_empty(),
        format!("{} bytes; threads 1 vs 4 identical: {}; rerun identical: {}", one.len(), one == four, one == again),
    );
}

// --- 12 ------------------------------------------------------------------

/// Reference RB (x10², earn/emp/ovt/awe) for the SAR, no-ME scenario at
/// full scale. Only entries with magnitude >= 1 are sign-checked.
const REFERENCE_RB: [(&str, [f64; 4]); 16] = [
    ("rdi", [0.0, 0.0, 0.2, 0.0]),
    ("greg", [0.0, 0.0, 0.2, 0.0]),
    ("qr_ma", [0.0, 0.0, 0.2, 0.0]),
    ("kw", [0.1, -0.2, 0.3, 0.2]),
    ("kw_cal", [0.2, 0.0, 0.4, 0.2]),
    ("kw_earn", [-0.1, -0.3, 0.1, 0.2]),
    ("alp", [-0.2, 0.0, 0.6, -0.1]),
    ("wgt_reg_mi", [0.2, 0.0, 0.6, 0.3]),
    ("dr_wgt", [0.2, 0.0, 0.6, 0.3]),
    ("hd_mi", [0.2, 0.2, 0.5, 0.0]),
    ("sp", [0.0, 0.0, 0.0, 0.0]),
    ("sp_cal", [0.0, 0.0, 0.0, 0.0]),
    ("co_bd", [-6.2, -6.3, -6.5, 0.0]),
    ("co_cal_kwfr", [0.1, 0.0, 0.1, 0.2]),
    ("auxdiv", [-2.9, -2.8, -3.3, -0.1]),
    ("kwfr", [0.4, 0.1, 0.6, 0.3]),
];
const REFERENCE_EARN_RRMSE: [(&str, f64); 3] = [("greg", 0.8), ("rdi", 1.0), ("qr_ma", 1.3)];

fn criterion_12(ledger: &mut Ledger) {
    let json = serde_json::json!({
        "scenario": {"missingness": "SAR", "measurement_error": false},
        "estimators": REFERENCE_RB.iter().map(|(e, _)| *e).collect::<Vec<_>>(),
        "replicates": 2000,
        "seed": 20_240_601u64,
        "population": {"synthesize": {"n": 900_000}},
    });
    let cfg = ScenarioConfig::from_value(json).expect("full config");
    let frame = cfg.load_frame(None).expect("population");
    let r = run_config(&frame, &cfg, None).expect("full run").remove(0);
    let vars = ["earn", "emp", "ovt", "awe"];
    let mut mismatches = Vec::new();
    let mut checked = 0;
    for (est, signs) in REFERENCE_RB {
        for (v, s) in vars.iter().zip(signs) {
            if s.abs() >= 1.0 {
                checked += 1;
            }
            if s.abs() >= 1.0 && (rb(&r, est, v) * s) <= 0.0 {
                mismatches.push(format!("{est}/{v}"));
            }
        }
    }
    let mut ours: Vec<(&str, f64)> = REFERENCE_EARN_RRMSE.iter().map(|(e, _)| (*e, rrmse(&r, e, "earn"))).collect();
    ours.sort_by(|a, b| a.1.total_cmp(&b.1));
    let order: Vec<&str> = ours.iter().map(|(e, _)| *e).collect();
    let rank_ok = order == REFERENCE_EARN_RRMSE.map(|(e, _)| e);
    ledger.check(
        "12",
        "full-scale sign and rank shape check (SAR, no ME)",
        mismatches.is_empty() && rank_ok,
        format!("{checked} signed entries, mismatches {mismatches:?}; earn RRMSE order {order:?}"),
    );
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let full_shape = args.iter().any(|a| a == "--full-shape");
    let reference = args
        .iter()
        .position(|a| a == "--reference-population")
        .and_then(|i| args.get(i + 1))
        .map(PathBuf::from);
    // the libtest-style listing probe from `cargo test -- --list`
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let mut ledger = Ledger { lines: Vec::new() };
    let started = Instant::now();

    criterion_1(&mut ledger);
    criterion_2(&mut ledger);
    criterion_3(&mut ledger);
    criterion_4(&mut ledger);

    let desk_start = Instant::now();
    let cfg = desk_config(r#"{"missingness": "SAR", "measurement_error": false}"#, &["ht"], 1);
    let frame = cfg.load_frame(None).expect("desk population");
    let sar = desk_run(
        &frame,
        r#"{"missingness": "SAR", "measurement_error": false}"#,
        &["ht", "greg", "rdi", "qr_ma", "wgt_reg_mi", "sp", "sp_cal"],
    );
    criteria_5_6(&mut ledger, &sar);
    let me = desk_run(
        &frame,
        r#"{"missingness": "SAR", "measurement_error": true}"#,
        &["greg", "kw", "kw_cor", "sp", "kwfr", "kwfr_cor"],
    );
    criterion_7(&mut ledger, &me);
    let snar = desk_run(
        &frame,
        r#"{"missingness": "SNAR", "measurement_error": false}"#,
        &["kw", "kw_earn", "sp", "sp_cal"],
    );
    criterion_8(&mut ledger, &snar);
    criterion_9(&mut ledger, &frame);
    criterion_10(&mut ledger, &sar, reference);
    let desk_minutes = desk_start.elapsed().as_secs_f64() / 60.0;
    ledger.check(
        "5-9",
        "desk-scale runtime",
        desk_minutes < DESK_RUNTIME_MINUTES,
        format!("{desk_minutes:.1} min (limit {DESK_RUNTIME_MINUTES} min)"),
    );
    criterion_11(&mut ledger);
    if full_shape {
        criterion_12(&mut ledger);
    } else {
        ledger.record("12", "full-scale sign and rank shape check", Verdict::Skip, "long run; pass --full-shape");
    }

    let unexpected: Vec<&str> = ledger
        .lines
        .iter()
        .filter(|(id, v)| *v == Verdict::Fail && !DOCUMENTED_GAPS.contains(&id.as_str()))
        .map(|(id, _)| id.as_str())
        .collect();
    let documented = ledger.lines.iter().filter(|(id, v)| *v == Verdict::Fail && DOCUMENTED_GAPS.contains(&id.as_str())).count();
    println!(
        "acceptance: {} lines, {} unexpected failure(s), {} documented gap(s), {:.0}s",
        ledger.lines.len(),
        unexpected.len(),
        documented,
        started.elapsed().as_secs_f64()
    );
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
