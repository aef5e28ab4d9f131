//! Patient-level CSV input.
//!
//! The header row is required and must name exactly the columns
//! `id,treat,y10,y20,y1,y2,y3,y4` (any order). Empty cells are missing
//! values; records with any missing value are dropped and reported.

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use lvcomp::model::{Dataset, PatientRecord};

use crate::error::CliError;

pub const COLUMNS: [&str; 8] = ["id", "treat", "y10", "y20", "y1", "y2", "y3", "y4"];

#[derive(Debug, Clone, PartialEq)]
pub struct Excluded {
    pub line: u64,
    pub id: String,
    pub missing: Vec<&'static str>,
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: Dataset,
    pub excluded: Vec<Excluded>,
}

fn at(line: u64, col: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("line {line}: column `{col}`: {msg}"))
}

fn number(line: u64, col: &str, s: &str) -> Result<f64, CliError> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(at(line, col, format!("`{s}` is not a finite number"))),
    }
}

fn level(line: u64, col: &str, s: &str, lo: u8, hi: u8) -> Result<u8, CliError> {
    match s.parse::<u8>() {
        Ok(v) if (lo..=hi).contains(&v) => Ok(v),
        Ok(v) => Err(at(line, col, format!("{v} outside {lo}..={hi}"))),
        Err(_) => Err(at(line, col, format!("`{s}` is not an integer"))),
    }
}

pub fn parse_dataset<R: Read>(input: R, k3: u8) -> Result<Loaded, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = rdr
        .headers()
        .map_err(|e| CliError::Input(format!("line 1: {e}")))?
        .clone();
    let names: Vec<&str> = header.iter().collect();
    for c in COLUMNS {
        if !names.contains(&c) {
            return Err(CliError::Input(format!("line 1: missing column `{c}`")));
        }
    }
    if let Some(extra) = names.iter().find(|n| !COLUMNS.contains(n)) {
        return Err(CliError::Input(format!("line 1: unexpected column `{extra}`")));
    }
    if names.len() != COLUMNS.len() {
        return Err(CliError::Input("line 1: repeated column".into()));
    }
    let idx: Vec<usize> = COLUMNS
        .iter()
        .map(|c| names.iter().position(|n| n == c).expect("checked above"))
        .collect();

    let mut patients = Vec::new();
    let mut excluded = Vec::new();
    let mut ids = HashSet::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::Input(format!("line {line}: {e}"))
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let cell = |k: usize| row.get(idx[k]).unwrap_or("");
        let id = cell(0).to_string();
        if id.is_empty() {
            return Err(at(line, "id", "missing id"));
        }
        if !ids.insert(id.clone()) {
            return Err(at(line, "id", format!("duplicate id `{id}`")));
        }
        let missing: Vec<&'static str> = (1..8).filter(|&k| cell(k).is_empty()).map(|k| COLUMNS[k]).collect();
        if !missing.is_empty() {
            // still reject malformed cells that are present
            for k in 1..8 {
                let s = cell(k);
                if !s.is_empty() {
                    match k {
                        1 | 7 => drop(level(line, COLUMNS[k], s, 0, 1)?),
                        6 => drop(level(line, COLUMNS[k], s, 1, k3)?),
                        _ => drop(number(line, COLUMNS[k], s)?),
                    }
                }
            }
            excluded.push(Excluded { line, id, missing });
            continue;
        }
        patients.push(PatientRecord {
            id,
            treat: level(line, "treat", cell(1), 0, 1)?,
            y10: number(line, "y10", cell(2))?,
            y20: number(line, "y20", cell(3))?,
            y1: number(line, "y1", cell(4))?,
            y2: number(line, "y2", cell(5))?,
            y3: level(line, "y3", cell(6), 1, k3)?,
            y4: level(line, "y4", cell(7), 0, 1)?,
        });
    }
    if patients.is_empty() {
        return Err(CliError::Input("no complete records".into()));
    }
    let dataset = Dataset::new(patients, k3)?;
    Ok(Loaded { dataset, excluded })
}

pub fn read_dataset(path: &Path, k3: u8) -> Result<(Loaded, Vec<u8>), CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let loaded = parse_dataset(bytes.as_slice(), k3)?;
    Ok((loaded, bytes))
}

/// CSV text of a dataset in the input schema.
pub fn write_dataset(data: &Dataset) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COLUMNS).expect("in-memory write");
    for p in data.patients() {
        w.write_record([
            p.id.clone(),
            p.treat.to_string(),
            p.y10.to_string(),
            p.y20.to_string(),
            p.y1.to_string(),
            p.y2.to_string(),
            p.y3.to_string(),
            p.y4.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8 csv")
}
