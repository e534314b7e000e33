//! Command-line front end and HTTP JSON service for hypodb.

pub mod commands;
pub mod manifest;
pub mod report;
pub mod server;
pub mod state;

use hypodb_core::analytics::AnalyticsError;
use hypodb_core::pipeline::PipelineError;
use thiserror::Error;

pub use commands::{run, Cli, Command, Format};

/// Errors surfaced to the user. `Validation` exits with status 2, `Failed`
/// with status 1.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Failed(e.to_string())
        }
    }
}

impl From<AnalyticsError> for CliError {
    fn from(e: AnalyticsError) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Failed(e.to_string())
        }
    }
}
