//! Command-line front end: configuration, subcommand dispatch, and CSV/JSON
//! emission of figure-reproduction data.
//!
//! Every run resolves its parameters from an optional TOML config file plus
//! command-line overrides (flags win), writes its tables to the output
//! directory, and drops a `manifest.json` echoing the fully resolved
//! configuration and seed. Identical config and seed produce byte-identical
//! outputs.

pub mod commands;
pub mod config;

use std::process::ExitCode;

/// Process exit discipline: 0 success, 2 configuration error, 3 numerical or
/// runtime failure.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(2),
            CliError::Runtime(_) => ExitCode::from(3),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Config(msg.into()))
}
