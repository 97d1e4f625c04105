//! Command-line front end. Exit codes: 0 success, 1 configuration error,
//! 2 runtime or numerical error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bigdata::{draw_big_dataset, selection_probabilities};
use crate::design::{anticipated_rse, AllocationOptions, DesignKind};
use crate::error::Error;
use crate::population::{synthesize_population, write_population, PopulationConfig, INDUSTRIES, STATES};
use crate::rng::replicate_stream;
use crate::simulation::{
    allocate_design, apply_overrides, read_results_csv, read_sizes_csv, render_markdown, run_config, write_output,
    write_results_csv, write_sizes_csv, Format, PopulationSource, Scale, ScenarioConfig,
};

#[derive(Debug, Parser)]
#[command(name = "nonprob", version, about = "Survey estimation with non-probability big data: population synthesis, allocation, Monte Carlo simulation and reporting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Configuration file (JSON)
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output file; standard output when omitted
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Master seed, overriding the config
    #[arg(long)]
    pub seed: Option<u64>,
    /// Population size and replicate preset
    #[arg(long, value_enum)]
    pub scale: Option<Scale>,
    /// Config overrides applied after parsing, e.g. replicates=50
    #[arg(value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic population and write it as CSV
    SynthPop(Common),
    /// Compute reference sample allocations for each design
    Allocate {
        #[command(flatten)]
        common: Common,
        /// Output format
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Run scenario replicates and write RB/RRMSE results
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Worker threads for replicates (default: available parallelism)
        #[arg(long)]
        threads: Option<usize>,
        /// Output format
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Render a results CSV as tables
    Report {
        /// Results CSV written by `simulate`
        #[arg(long, value_name = "PATH")]
        results: PathBuf,
        /// Output file; standard output when omitted
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Output format
        #[arg(long, value_enum, default_value = "markdown")]
        format: Format,
    },
}

enum Failure {
    Config(Error),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config() {
            Failure::Config(e)
        } else {
            Failure::Runtime(e)
        }
    }
}

fn runtime(e: Error) -> Failure {
    Failure::Runtime(e)
}

fn read_json(path: &Path) -> std::result::Result<serde_json::Value, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(Error::io(path, e)))?;
    serde_json::from_str(&text).map_err(|e| Failure::Config(Error::config(path.display().to_string(), e.to_string())))
}

/// Sidecar path for the sample-size table: `results.csv` → `results.sizes.csv`.
pub fn sizes_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.sizes.csv"))
}

fn scenario_config(common: &Common) -> std::result::Result<(ScenarioConfig, Option<PathBuf>), Failure> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Failure::Config(Error::config("--config", "a scenario config file is required")))?;
    let mut doc = read_json(path)?;
    apply_overrides(&mut doc, &common.overrides)?;
    let mut cfg = ScenarioConfig::from_value(doc)?;
    if let Some(scale) = common.scale {
        cfg.apply_scale(scale);
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let base = path.parent().map(Path::to_path_buf);
    Ok((cfg, base))
}

fn synth_pop(common: &Common) -> std::result::Result<(), Failure> {
    let mut doc = match &common.config {
        Some(p) => read_json(p)?,
        None => serde_json::to_value(PopulationConfig::bundled()).map_err(|e| runtime(Error::Invalid(e.to_string())))?,
    };
    apply_overrides(&mut doc, &common.overrides)?;
    let mut cfg: PopulationConfig =
        serde_json::from_value(doc).map_err(|e| Failure::Config(Error::config("<population config>", e.to_string())))?;
    if let Some(scale) = common.scale {
        cfg.n = scale.population_size();
    }
    let seed = common.seed.unwrap_or(cfg.seed);
    let frame = synthesize_population(&cfg, seed)?;
    let mut buf = Vec::new();
    write_population(&frame, &mut buf).map_err(runtime)?;
    write_output(common.out.as_deref(), &buf).map_err(runtime)?;
    let t = frame.totals();
    eprintln!(
        "synthesized {} units (seed {seed}, config {}): earn {:.0}, emp {:.0}, ovt {:.0}",
        frame.n(),
        &cfg.hash()[..12],
        t[0],
        t[1],
        t[2]
    );
    Ok(())
}

fn allocate(common: &Common, format: Format) -> std::result::Result<(), Failure> {
    let (cfg, base) = scenario_config(common)?;
    let frame = cfg.load_frame(base.as_deref())?;
    let constraints = cfg.constraint_specs()?;
    let opts = AllocationOptions {
        min_n: cfg.min_stratum_n,
        ..AllocationOptions::default()
    };
    let spec = cfg.scenario.specs()[0];
    let pi = selection_probabilities(&frame, &cfg.selection_model(&spec))?;
    let big = draw_big_dataset(&pi, false, &mut replicate_stream(cfg.seed, 0, &format!("{}/big_data", spec.name())))?;

    let mut csv_out = csv::Writer::from_writer(Vec::new());
    let _ = csv_out.write_record(["design", "state", "industry_division", "size_band", "n_pop", "n_sample", "take_all"]);
    let mut md = String::from("| Design | Strata | Take-all units | Total n | National RSE |\n|---|---:|---:|---:|---:|\n");
    for &d in &cfg.designs {
        let b = (d == DesignKind::DualScreening).then_some(&big);
        let (strata, alloc) = allocate_design(&frame, b, d, &constraints, &opts)?;
        for (s, &n) in strata.iter().zip(&alloc.n_h) {
            let _ = csv_out.write_record([
                d.name().to_string(),
                STATES[s.key.state as usize].to_string(),
                INDUSTRIES[s.key.industry as usize].to_string(),
                s.key.band.label().to_string(),
                s.n_pop().to_string(),
                n.to_string(),
                (s.take_all || n == s.n_pop()).to_string(),
            ]);
        }
        let national = anticipated_rse(&strata, &alloc.n_h, &[crate::design::ConstraintSpec::new(crate::design::Domain::National, 1.0)])[0];
        let take_all: usize = strata.iter().filter(|s| s.take_all).map(|s| s.n_pop()).sum();
        let rse = national.map_or("-".into(), |r| format!("{:.2}%", 100.0 * r));
        let _ = writeln!(md, "| {} | {} | {take_all} | {} | {rse} |", d.name(), strata.len(), alloc.total_n);
        eprintln!("{}: total n = {} over {} strata", d.name(), alloc.total_n, strata.len());
    }
    let bytes = match format {
        Format::Csv => csv_out.into_inner().map_err(|e| runtime(Error::Invalid(e.to_string())))?,
        Format::Markdown => md.into_bytes(),
    };
    write_output(common.out.as_deref(), &bytes).map_err(runtime)?;
    Ok(())
}

fn simulate(common: &Common, threads: Option<usize>, format: Format) -> std::result::Result<(), Failure> {
    let (cfg, base) = scenario_config(common)?;
    let frame = cfg.load_frame(base.as_deref())?;
    if let PopulationSource::Load(p) = &cfg.population {
        eprintln!("loaded {} units from {}", frame.n(), p.display());
    }
    let results = run_config(&frame, &cfg, threads)?;
    let rows: Vec<_> = results.iter().flat_map(|r| r.rows.iter().cloned()).collect();
    let sizes: Vec<_> = results.iter().flat_map(|r| r.sample_sizes.iter().cloned()).collect();
    for r in &results {
        for (est, msg) in &r.first_failures {
            let n = r.row(est, "earn").map_or(0, |row| row.n_failures);
            eprintln!("{}: {est} failed in {n} replicates (first: {msg})", r.scenario);
        }
    }
    match format {
        Format::Csv => {
            let mut buf = Vec::new();
            write_results_csv(&rows, &mut buf).map_err(runtime)?;
            write_output(common.out.as_deref(), &buf).map_err(runtime)?;
            if let Some(out) = &common.out {
                let mut sb = Vec::new();
                write_sizes_csv(&sizes, &mut sb).map_err(runtime)?;
                write_output(Some(&sizes_path(out)), &sb).map_err(runtime)?;
            }
        }
        Format::Markdown => {
            write_output(common.out.as_deref(), render_markdown(&rows, &sizes).as_bytes()).map_err(runtime)?;
        }
    }
    Ok(())
}

fn report(results: &Path, out: Option<&Path>, format: Format) -> std::result::Result<(), Failure> {
    let file = std::fs::File::open(results).map_err(|e| Failure::Config(Error::io(results, e)))?;
    let rows = read_results_csv(file)?;
    let sp = sizes_path(results);
    let sizes = match std::fs::File::open(&sp) {
        Ok(f) => read_sizes_csv(f)?,
        Err(_) => Vec::new(),
    };
    let bytes = match format {
        Format::Markdown => render_markdown(&rows, &sizes).into_bytes(),
        Format::Csv => {
            let mut buf = Vec::new();
            write_results_csv(&rows, &mut buf).map_err(runtime)?;
            buf
        }
    };
    write_output(out, &bytes).map_err(runtime)
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::SynthPop(c) => synth_pop(c),
        Command::Allocate { common, format } => allocate(common, *format),
        Command::Simulate { common, threads, format } => simulate(common, *threads, *format),
        Command::Report { results, out, format } => report(results, out.as_deref(), *format),
    };
    match outcome {
        Ok(()) => 0,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            1
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}
