//! Batch runner for `rowsplit`: loads or generates matrices, runs one task on
//! each, and writes a versioned JSON report plus a CSV summary.

pub mod config;
pub mod ensemble;
pub mod io;
pub mod report;
mod run;

use thiserror::Error;

pub use config::{EnsembleKind, EnsembleSpec, ExperimentConfig, Format, Source, Task};
pub use io::load_matrix;
pub use report::{MatrixEntry, RunReport, Status};
pub use run::run;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("report error: {0}")]
    Report(String),
    #[error(transparent)]
    Core(#[from] rowsplit::Error),
}

/// Outcome of re-running a stored report's configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Replay {
    pub identical: bool,
    pub mismatches: Vec<String>,
}

impl Replay {
    pub fn ok(&self) -> bool {
        self.identical && self.mismatches.is_empty()
    }
}

/// Re-evaluates the stored partitions and re-runs the stored configuration,
/// comparing everything outside the timing block byte for byte.
pub fn replay(stored: &RunReport) -> Result<Replay, CliError> {
    let mismatches = stored.reverify();
    let fresh = run(&stored.config)?;
    Ok(Replay {
        identical: fresh.deterministic_json() == stored.deterministic_json(),
        mismatches,
    })
}
