use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::Config;
use crate::tasks::Row;

/// Bumped whenever a column is added, removed or renamed.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct Tolerances {
    pub root_bracket: f64,
    pub band_edge_margin: f64,
    pub dmrg_energy: f64,
    pub dmrg_truncation: f64,
    pub dmrg_cutoff: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let d = qebath::mps::DmrgOptions::default();
        Self {
            root_bracket: qebath::single::EDGE_PROBE,
            band_edge_margin: qebath::single::EDGE_MARGIN,
            dmrg_energy: d.energy_tol,
            dmrg_truncation: d.truncation_tol,
            dmrg_cutoff: d.cutoff,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub schema_version: u32,
    pub code_version: &'static str,
    pub task: &'static str,
    pub config: &'a Config,
    pub columns: &'a [String],
    pub rows: usize,
    pub errors: usize,
    pub wall_seconds: f64,
    pub tolerances: Tolerances,
    pub csv: String,
}

pub fn manifest_path(csv: &Path) -> PathBuf {
    csv.with_extension("manifest.json")
}

/// Sort rows by their parameter tuple.
pub fn sort_rows(rows: &mut [Row]) {
    rows.sort_by(|a, b| {
        for (x, y) in a.key.iter().zip(&b.key) {
            let o = x.total_cmp(y);
            if o.is_ne() {
                return o;
            }
        }
        a.key.len().cmp(&b.key.len())
    });
}

pub fn header(leading: &[&str], columns: &[String]) -> Vec<String> {
    let mut h: Vec<String> = leading.iter().map(|s| s.to_string()).collect();
    h.extend(columns.iter().cloned());
    h.extend(["status".to_string(), "message".to_string()]);
    h
}

pub fn write_csv(path: &Path, header: &[String], rows: &[Row], leading: impl Fn(&Row) -> Vec<String>) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        let mut rec = leading(r);
        rec.extend(r.cells.iter().cloned());
        match &r.error {
            None => rec.extend(["ok".to_string(), String::new()]),
            Some(e) => rec.extend(["error".to_string(), e.clone()]),
        }
        w.write_record(&rec)?;
    }
    w.flush()
}

pub fn write_manifest(path: &Path, m: &Manifest) -> std::io::Result<()> {
    let json = serde_json::to_string_pretty(m).map_err(std::io::Error::other)?;
    std::fs::write(path, json + "\n")
}
