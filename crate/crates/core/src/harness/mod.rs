//! Config-driven experiment runs with reproducible CSV output.

mod config;
mod output;
mod run;

use std::path::PathBuf;

use thiserror::Error;

use crate::divisibility::DivisibilityError;
use crate::linalg::LinalgError;
use crate::master::MasterError;
use crate::unravel::UnravelError;

pub use config::{
    DomainSection, EnsembleConfig, InitialState, ModelConfig, PolicyConfig, PolicyParameters, RunConfig, ScanSection,
    SweepSection, POLICY_NAMES,
};
pub use output::{
    fmt_f64, sha256_hex, write_outputs, Manifest, ManifestEntry, Table, DOMAIN_HEADER, EXACT_HEADER, MANIFEST_NAME,
    PSI_DET_HEADER, REALIZATIONS_HEADER, SCAN_HEADER, STATS_HEADER, SWEEP_HEADER, VIOLATION_HEADER,
};
pub use run::{compute, execute, Overrides, RunReport, Subcommand};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(csv::Error),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Unravel(#[from] UnravelError),
    #[error(transparent)]
    Master(#[from] MasterError),
    #[error(transparent)]
    Divisibility(#[from] DivisibilityError),
}

impl HarnessError {
    pub fn config(path: &str, message: &str) -> Self {
        HarnessError::Config { path: path.to_string(), message: message.to_string() }
    }

    pub fn missing(path: &str, field: &str) -> Self {
        HarnessError::Config { path: path.to_string(), message: format!("missing field `{field}`") }
    }
}
