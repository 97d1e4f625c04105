use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::aggregate::{SampleSizeRow, SummaryRow, VARIABLE_NAMES};

pub const RESULTS_HEADER: [&str; 8] = [
    "scenario",
    "design",
    "estimator",
    "variable",
    "rb",
    "rrmse",
    "n_replicates",
    "n_failures",
];

pub const SIZES_HEADER: [&str; 6] = ["scenario", "design", "mean_n", "min_n", "max_n", "n_replicates"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Markdown,
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io("<output>", io),
        other => Error::Invalid(format!("csv: {other:?}")),
    }
}

pub fn write_results_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.scenario.clone(),
            r.design.clone(),
            r.estimator.clone(),
            r.variable.clone(),
            r.rb.to_string(),
            r.rrmse.to_string(),
            r.n_replicates.to_string(),
            r.n_failures.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<output>", e))
}

pub fn write_sizes_csv<W: Write>(rows: &[SampleSizeRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SIZES_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.scenario.clone(),
            r.design.clone(),
            r.mean_n.to_string(),
            r.min_n.to_string(),
            r.max_n.to_string(),
            r.n_replicates.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<output>", e))
}

fn read_table<R: Read>(input: R, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let got = r.headers().map_err(|e| Error::Schema(e.to_string()))?.clone();
    if got.iter().collect::<Vec<_>>() != header {
        return Err(Error::Schema(format!("expected header {}", header.join(","))));
    }
    r.records()
        .enumerate()
        .map(|(i, rec)| rec.map_err(|e| Error::Parse { row: i + 2, message: e.to_string() }))
        .collect()
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, k: usize, row: usize) -> Result<T> {
    rec[k].parse().map_err(|_| Error::Parse {
        row,
        message: format!("bad value {:?} in column {k}", &rec[k]),
    })
}

pub fn read_results_csv<R: Read>(input: R) -> Result<Vec<SummaryRow>> {
    read_table(input, &RESULTS_HEADER)?
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let row = i + 2;
            Ok(SummaryRow {
                scenario: rec[0].to_string(),
                design: rec[1].to_string(),
                estimator: rec[2].to_string(),
                variable: rec[3].to_string(),
                rb: field(rec, 4, row)?,
                rrmse: field(rec, 5, row)?,
                n_replicates: field(rec, 6, row)?,
                n_failures: field(rec, 7, row)?,
            })
        })
        .collect()
}

pub fn read_sizes_csv<R: Read>(input: R) -> Result<Vec<SampleSizeRow>> {
    read_table(input, &SIZES_HEADER)?
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let row = i + 2;
            Ok(SampleSizeRow {
                scenario: rec[0].to_string(),
                design: rec[1].to_string(),
                mean_n: field(rec, 2, row)?,
                min_n: field(rec, 3, row)?,
                max_n: field(rec, 4, row)?,
                n_replicates: field(rec, 5, row)?,
            })
        })
        .collect()
}

/// `value × 100` to one decimal; a value that rounds to zero prints as
/// `0.0`, and missing values as `-`.
pub fn format_scaled(value: f64) -> String {
    if !value.is_finite() {
        return "-".into();
    }
    let s = format!("{:.1}", value * 100.0);
    if s == "-0.0" {
        "0.0".into()
    } else {
        s
    }
}

fn ordered_unique<'a>(items: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut out: Vec<&str> = Vec::new();
    for s in items {
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

/// One RB/RRMSE table per scenario (×10², one decimal), rows grouped by
/// design, followed by a realized sample-size table.
pub fn render_markdown(rows: &[SummaryRow], sizes: &[SampleSizeRow]) -> String {
    let mut out = String::new();
    let scenarios = ordered_unique(rows.iter().map(|r| r.scenario.as_str()).chain(sizes.iter().map(|s| s.scenario.as_str())));
    let header = "| Design | Estimator | RB Earn | RB Emp | RB Ovt | RB AWE | RRMSE Earn | RRMSE Emp | RRMSE Ovt | RRMSE AWE | Failures |\n\
                  |---|---|---:|---:|---:|---:|---:|---:|---:|---:|---:|\n";
    if scenarios.is_empty() {
        out.push_str("RB and RRMSE (×10²)\n\n");
        out.push_str(header);
        return out;
    }
    for sc in scenarios {
        let _ = writeln!(out, "## {sc}\n\nRB and RRMSE (×10²)\n");
        out.push_str(header);
        let mine: Vec<&SummaryRow> = rows.iter().filter(|r| r.scenario == sc).collect();
        for design in ordered_unique(mine.iter().map(|r| r.design.as_str())) {
            for est in ordered_unique(mine.iter().filter(|r| r.design == design).map(|r| r.estimator.as_str())) {
                let get = |v: &str| mine.iter().find(|r| r.estimator == est && r.variable == v);
                let rb: Vec<String> = VARIABLE_NAMES.iter().map(|v| get(v).map_or("-".into(), |r| format_scaled(r.rb))).collect();
                let rr: Vec<String> =
                    VARIABLE_NAMES.iter().map(|v| get(v).map_or("-".into(), |r| format_scaled(r.rrmse))).collect();
                let failures = get("earn").map_or(0, |r| r.n_failures);
                let _ = writeln!(out, "| {design} | {est} | {} | {} | {failures} |", rb.join(" | "), rr.join(" | "));
            }
        }
        let mine_sizes: Vec<&SampleSizeRow> = sizes.iter().filter(|s| s.scenario == sc).collect();
        if !mine_sizes.is_empty() {
            out.push_str("\nReference sample sizes\n\n| Design | Mean n | Min n | Max n | Saving vs single |\n|---|---:|---:|---:|---:|\n");
            let single = mine_sizes.iter().find(|s| s.design == "single").map(|s| s.mean_n);
            for s in &mine_sizes {
                let saving = match single {
                    Some(base) if s.design != "single" && base > 0.0 => format!("{:.0}%", 100.0 * (1.0 - s.mean_n / base)),
                    _ => "-".into(),
                };
                let _ = writeln!(out, "| {} | {:.0} | {} | {} | {saving} |", s.design, s.mean_n, s.min_n, s.max_n);
            }
        }
        out.push('\n');
    }
    out
}

/// Writes to a file, or to standard output when `path` is `None`.
pub fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| Error::io(p, e)),
        None => std::io::stdout().write_all(bytes).map_err(|e| Error::io("<stdout>", e)),
    }
}
