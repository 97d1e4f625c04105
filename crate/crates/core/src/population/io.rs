use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{PopulationFrame, Provenance, UnitRecord, INDUSTRIES, SIZE_GROUPS, STATES};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 11] = [
    "unit_id",
    "state",
    "industry_division",
    "size_group",
    "frame_employment",
    "reported_employment",
    "earnings",
    "overtime",
    "earnings_star",
    "emp_star",
    "ovt_star",
];

pub fn write_population<W: Write>(frame: &PopulationFrame, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::Invalid(e.to_string());
    w.write_record(CSV_HEADER).map_err(wrap)?;
    for u in frame.units() {
        w.write_record([
            u.unit_id.to_string(),
            STATES[u.state as usize].to_string(),
            INDUSTRIES[u.industry as usize].to_string(),
            SIZE_GROUPS[u.size_group as usize].to_string(),
            u.frame_employment.to_string(),
            u.reported_employment.to_string(),
            u.earnings.to_string(),
            u.overtime.to_string(),
            u.earnings_star.to_string(),
            u.emp_star.to_string(),
            u.ovt_star.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::Invalid(e.to_string()))
}

pub fn save_population(frame: &PopulationFrame, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_population(frame, std::io::BufWriter::new(file)).map_err(|e| match e {
        Error::Invalid(msg) => Error::io(path, std::io::Error::other(msg)),
        other => other,
    })
}

fn level(labels: &[&str], value: &str, column: &str, row: usize) -> Result<u8> {
    labels
        .iter()
        .position(|l| *l == value)
        .map(|i| i as u8)
        .ok_or_else(|| Error::Parse {
            row,
            message: format!("{column}: unknown level {value:?}"),
        })
}

fn number<T: std::str::FromStr>(value: &str, column: &str, row: usize) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Parse {
        row,
        message: format!("{column}: non-numeric value {value:?}"),
    })
}

/// Reads a population CSV. Columns are matched by name; rows are ordered by
/// `unit_id`, which must be unique and dense in `[1, N]`.
pub fn load_population(path: &Path) -> Result<PopulationFrame> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let file_hash = hex::encode(Sha256::digest(&bytes));
    let mut reader = csv::Reader::from_reader(bytes.as_slice());
    let header = reader.headers().map_err(|e| Error::Schema(e.to_string()))?.clone();
    let mut cols = [0usize; 11];
    for (slot, name) in cols.iter_mut().zip(CSV_HEADER) {
        *slot = header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))?;
    }

    let mut units = Vec::new();
    let mut seen = HashSet::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Parse { row, message: e.to_string() })?;
        let field = |k: usize| rec.get(cols[k]).unwrap_or("");
        let unit_id: u64 = number(field(0), CSV_HEADER[0], row)?;
        if !seen.insert(unit_id) {
            return Err(Error::DuplicateUnit(unit_id));
        }
        units.push(UnitRecord {
            unit_id,
            state: level(&STATES, field(1), CSV_HEADER[1], row)?,
            industry: level(&INDUSTRIES, field(2), CSV_HEADER[2], row)?,
            size_group: level(&SIZE_GROUPS, field(3), CSV_HEADER[3], row)?,
            frame_employment: number(field(4), CSV_HEADER[4], row)?,
            reported_employment: number(field(5), CSV_HEADER[5], row)?,
            earnings: number(field(6), CSV_HEADER[6], row)?,
            overtime: number(field(7), CSV_HEADER[7], row)?,
            earnings_star: number(field(8), CSV_HEADER[8], row)?,
            emp_star: number(field(9), CSV_HEADER[9], row)?,
            ovt_star: number(field(10), CSV_HEADER[10], row)?,
        });
    }
    units.sort_by_key(|u| u.unit_id);
    if let Some((i, u)) = units.iter().enumerate().find(|(i, u)| u.unit_id != *i as u64 + 1) {
        return Err(Error::Schema(format!(
            "unit_id must be dense in [1, N]: found {} at position {}",
            u.unit_id,
            i + 1
        )));
    }
    Ok(PopulationFrame::from_dense_units(units, Provenance::Ingested { file_hash }))
}
