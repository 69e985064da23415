//! CSV emission with fixed headers and the per-directory manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;

pub const STATS_HEADER: [&str; 15] = [
    "t",
    "exact_x",
    "exact_y",
    "exact_z",
    "est_x",
    "est_y",
    "est_z",
    "stderr_x",
    "stderr_y",
    "stderr_z",
    "p0",
    "p1",
    "p_det",
    "entropy",
    "cumulative_jumps",
];
pub const EXACT_HEADER: [&str; 4] = ["t", "exact_x", "exact_y", "exact_z"];
pub const SCAN_HEADER: [&str; 3] = ["kappa", "theta", "positive"];
pub const DOMAIN_HEADER: [&str; 4] = ["t", "domain_fraction", "basis_ok", "decomposable"];
pub const SWEEP_HEADER: [&str; 4] = ["lambda", "entropy_mean", "jumps_total", "wall_seconds"];
pub const REALIZATIONS_HEADER: [&str; 6] = ["t", "realization", "x", "y", "z", "label"];
pub const PSI_DET_HEADER: [&str; 4] = ["t", "x", "y", "z"];
pub const VIOLATION_HEADER: [&str; 5] = ["t", "x", "y", "z", "min_eigenvalue"];

/// Seventeen significant digits, enough to round-trip any f64. Negative
/// zero is written as zero.
pub fn fmt_f64(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.16e}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Rows of one CSV file held in memory until written.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.to_string(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, HarnessError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header).map_err(HarnessError::Csv)?;
        for row in &self.rows {
            w.write_record(row).map_err(HarnessError::Csv)?;
        }
        w.into_inner().map_err(|e| HarnessError::Csv(e.into_error().into()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_sha256: String,
    pub seed: u64,
    pub workers: usize,
    pub version: String,
    pub subcommand: String,
    pub files: Vec<ManifestEntry>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes every table and a manifest listing them into `dir`.
pub fn write_outputs(dir: &Path, tables: &[Table], mut manifest: Manifest) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::Io { path: dir.to_path_buf(), source: e })?;
    let mut written = Vec::new();
    manifest.files.clear();
    for table in tables {
        let bytes = table.to_bytes()?;
        let path = dir.join(&table.name);
        fs::write(&path, &bytes).map_err(|e| HarnessError::Io { path: path.clone(), source: e })?;
        manifest.files.push(ManifestEntry { name: table.name.clone(), sha256: sha256_hex(&bytes) });
        written.push(path);
    }
    manifest.files.sort_by(|a, b| a.name.cmp(&b.name));
    let path = dir.join(MANIFEST_NAME);
    let mut json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    json.push(b'\n');
    fs::write(&path, json).map_err(|e| HarnessError::Io { path: path.clone(), source: e })?;
    written.push(path);
    Ok(written)
}
