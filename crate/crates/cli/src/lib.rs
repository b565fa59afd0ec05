//! Command-line front end: scenario files, one subcommand per analysis, CSV
//! traces and a verification suite.

pub mod commands;
pub mod format;
pub mod scenario;
pub mod verify;

use std::path::PathBuf;

pub use scenario::{Scenario, ScenarioErrors};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioErrors),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Model(#[from] macgame::Error),
    /// An asserted analytic property does not hold.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed(_) => 1,
            _ => 2,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
