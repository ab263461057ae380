//! Operator surface for the `awarerl` binary: run configuration, generator
//! bindings and the sub-commands.

pub mod commands;
pub mod config;
pub mod remote;

use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Invalid or incomplete configuration; exit status 2.
    #[error("config error: {0}")]
    Config(String),
    /// A guard on the produced data tripped; exit status 3.
    #[error("{0}")]
    Guard(String),
    /// Any other failure; exit status 1.
    #[error("{0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Run(_) => 1,
            CliError::Config(_) => 2,
            CliError::Guard(_) => 3,
        })
    }

    pub fn run(e: impl std::fmt::Display) -> Self {
        CliError::Run(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
