//! Experiment runner: spec parsing, replicated simulation runs, timing sweeps
//! and offline verification of recorded runs.

use std::path::{Path, PathBuf};

use thiserror::Error;

pub mod experiment;
pub mod output;
pub mod scaling;
pub mod spec;
pub mod verify;

pub use experiment::{run_experiment, Aggregate, CellSummary};
pub use output::Estimate;
pub use scaling::{scaling_report, ScalingRow};
pub use spec::{Cell, ExperimentSpec, Overrides, ScalingSpec};
pub use verify::{verify_dir, VerifyReport};

/// Version stamped into every output file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Version of the per-run CSV column layout.
pub const CSV_SCHEMA: u32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Sim(#[from] vnembed::SimError),
    #[error("{failed} of {total} runs failed; outputs in {out} are marked incomplete")]
    Incomplete { failed: usize, total: usize, out: PathBuf },
    #[error("{0} invariant violations in recorded runs")]
    Violations(usize),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }
}
