//! TOML-configured experiments: plain simulation, averaging sweeps,
//! stability batteries, Itô residual checks and operator/coefficient
//! audits. Each run writes fixed-column CSV files and a `report.json`
//! into its own directory.

mod config;
mod output;
mod runners;

pub use config::{
    parse_config, AuditSpec, ConfigErrors, ConfigIssue, Criterion, ExperimentConfig, ExperimentKind, ExperimentSpec,
    ItoSpec, JumpLawBlock, OutputBlock, SolverBlock, StabilitySpec, SystemBlock,
};
pub use output::{
    AUDIT_COLUMNS, AVERAGING_SERIES_COLUMNS, AVERAGING_SUMMARY_COLUMNS, ITO_COLUMNS, MEANS_COLUMNS,
    SNAPSHOT_COLUMNS, STABILITY_SERIES_COLUMNS, TRAJECTORY_COLUMNS, VERDICT_COLUMNS,
};
pub use runners::{run_audits, run_averaging_sweep, run_ito_check, run_simulate, run_stability_battery};

use std::path::Path;

use serde::Serialize;

use crate::solver::SolverError;
use crate::stability::Verdict;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BLOW_UP: i32 = 3;
pub const EXIT_CRITERION: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("configuration errors:\n{0}")]
    Config(#[from] ConfigErrors),
    #[error("{context}: {source}")]
    Solver { context: String, source: SolverError },
    #[error("{context}: {message}")]
    Numerical { context: String, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl ExperimentError {
    pub(crate) fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        ExperimentError::Io { path: path.display().to_string(), message: e.to_string() }
    }

    pub(crate) fn solver(context: impl Into<String>) -> impl FnOnce(SolverError) -> Self {
        let context = context.into();
        move |source| ExperimentError::Solver { context, source }
    }

    pub(crate) fn numerical(context: impl Into<String>) -> impl FnOnce(String) -> Self {
        let context = context.into();
        move |message| ExperimentError::Numerical { context, message }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => EXIT_CONFIG,
            ExperimentError::Solver { source: SolverError::BlowUp { .. }, .. } => EXIT_BLOW_UP,
            _ => EXIT_RUNTIME,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    pub csv: Vec<String>,
    pub summary: serde_json::Value,
    pub verdicts: Vec<Verdict>,
    pub provenance: Provenance,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }
}

pub fn code_version() -> String {
    format!("mvlab {}", env!("CARGO_PKG_VERSION"))
}

/// Runs the configured experiment into `out` and writes `config.toml`
/// and `report.json` next to the CSV files.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentReport, ExperimentError> {
    match cfg.experiment.kind() {
        ExperimentKind::Simulate => run_simulate(cfg, out),
        ExperimentKind::Averaging => run_averaging_sweep(cfg, out),
        ExperimentKind::Stability => run_stability_battery(cfg, out),
        ExperimentKind::ItoCheck => run_ito_check(cfg, out),
        ExperimentKind::Audits => run_audits(cfg, out),
    }
}
