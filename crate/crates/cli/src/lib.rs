//! Scenario loading, command dispatch and JSON reports for `kkgeom`.

pub mod commands;
pub mod output;
pub mod scenario;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad file, JSON, table shape, expression or flag. Exit code 2.
    #[error("input error: {0}")]
    Input(String),
    /// Evaluation or integration failure. Exit code 1.
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

/// A finished command: one JSON document for stdout, a human summary for
/// stderr, and the process exit code.
#[derive(Debug)]
pub struct Outcome {
    pub json: serde_json::Value,
    pub summary: String,
    pub code: i32,
}
