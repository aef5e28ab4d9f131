//! Tables, provenance headers and JSON summaries.

use std::fs;
use std::path::Path;

use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `x` with 6 significant digits, trailing zeros dropped. Non-finite
/// values print as `NA`, `Inf` and `-Inf`.
pub fn sig6(x: f64) -> String {
    if x.is_nan() {
        return "NA".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "Inf".into() } else { "-Inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    // round first so that the exponent reflects e.g. 9.9999996 -> 10
    let sci = format!("{x:.5e}");
    let (mant, exp) = sci.split_once('e').expect("exponent form");
    let e: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&e) {
        let decimals = (5 - e).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{e}", trim_zeros(mant.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn sha256_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

/// Leading `#` lines of every table.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub command: String,
    pub seed: Option<u64>,
    /// (label, sha256 hex), e.g. the scenario or the input file and settings.
    pub hash: (String, String),
    /// (what, count) exclusion counts.
    pub exclusions: Vec<(String, usize)>,
}

impl Provenance {
    pub fn header(&self) -> String {
        let mut s = format!("# lvcomp {VERSION}\n# command: {}\n", self.command);
        if let Some(seed) = self.seed {
            s += &format!("# seed: {seed}\n");
        }
        s += &format!("# {}: {}\n", self.hash.0, self.hash.1);
        let ex: Vec<String> = self
            .exclusions
            .iter()
            .map(|(k, n)| format!("{k}={n}"))
            .collect();
        s += &format!(
            "# excluded: {}\n",
            if ex.is_empty() { "none".into() } else { ex.join(" ") }
        );
        s
    }

    pub fn json(&self) -> Value {
        serde_json::json!({
            "version": VERSION,
            "command": self.command,
            "seed": self.seed,
            self.hash.0.clone(): self.hash.1,
            "excluded": self
                .exclusions
                .iter()
                .map(|(k, n)| (k.clone(), Value::from(*n)))
                .collect::<serde_json::Map<_, _>>(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&'static str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, prov: &Provenance) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8 csv");
        prov.header() + &body
    }
}

/// Everything a command produces. The first table is the primary one,
/// printed to stdout when no output directory is given.
#[derive(Debug, Clone)]
pub struct Report {
    pub provenance: Provenance,
    pub tables: Vec<Table>,
    pub summary: Value,
}

impl Report {
    pub fn write(&self, out: Option<&Path>) -> Result<(), CliError> {
        match out {
            None => {
                if let Some(t) = self.tables.first() {
                    print!("{}", t.render(&self.provenance));
                }
                Ok(())
            }
            Some(dir) => {
                let ctx = |e: std::io::Error| CliError::Input(format!("{}: {e}", dir.display()));
                fs::create_dir_all(dir).map_err(ctx)?;
                for t in &self.tables {
                    fs::write(dir.join(format!("{}.csv", t.name)), t.render(&self.provenance))
                        .map_err(ctx)?;
                }
                let mut summary = self.provenance.json();
                if let (Value::Object(m), Value::Object(extra)) = (&mut summary, &self.summary) {
                    m.extend(extra.clone());
                }
                let text = serde_json::to_string_pretty(&summary).expect("serializable summary");
                fs::write(dir.join("summary.json"), text + "\n").map_err(ctx)?;
                Ok(())
            }
        }
    }
}
