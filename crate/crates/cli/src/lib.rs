//! Command-line front end for `chforce`: scenario files, runs, refinement and
//! continuous-dependence studies, characteristic tracing and diagnostics reports.
//!
//! Every command writes CSV files plus a `manifest.json` into its output directory.
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 numerical
//! instability, 4 diagnostic threshold failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{cmd_converge, cmd_diagnose, cmd_run, cmd_trace, CommandOptions};
pub use config::{ConvergeMode, ScenarioConfig, Thresholds};
pub use output::{Check, RunManifest};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical instability: {0}")]
    Instability(String),
    #[error("diagnostic thresholds failed: {}", .0.join(", "))]
    Threshold(Vec<String>),
    #[error("solver error: {0}")]
    Solver(chforce::Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) | CliError::Solver(_) => 2,
            CliError::Instability(_) => 3,
            CliError::Threshold(_) => 4,
        }
    }
}

impl From<chforce::Error> for CliError {
    fn from(e: chforce::Error) -> Self {
        match e {
            chforce::Error::Instability { .. } => CliError::Instability(e.to_string()),
            chforce::Error::Usage(_) | chforce::Error::InvalidData(_) | chforce::Error::InvalidGrid(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Solver(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
