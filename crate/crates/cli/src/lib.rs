//! Command-line front end for `seaforge`.
//!
//! Each subcommand reads one JSON [`config::RunConfig`], runs a single
//! analysis and writes CSV/JSON artifacts into the output directory. Result
//! data goes to stdout; diagnostics go to stderr through `log`.

pub mod commands;
pub mod config;
pub mod output;

use thiserror::Error;

/// The bundled UT-SEA configuration.
pub const BUNDLED_CONFIG: &str = include_str!("../configs/ut-sea.json");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    /// 1 for I/O, 2 for solver/numeric failure, 3 for invalid input.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Numeric(_) => 2,
            CliError::Validation(_) => 3,
        }
    }
}

impl From<seaforge::Error> for CliError {
    fn from(e: seaforge::Error) -> Self {
        use seaforge::Error as E;
        match e {
            E::Parameter { .. } | E::Config(_) => CliError::Validation(e.to_string()),
            E::NonConvergence { .. } | E::InfeasibleFrequency { .. } | E::NoCrossover { .. } | E::Evaluation { .. } => {
                CliError::Numeric(e.to_string())
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
