//! Operator-facing commands of the darkdepth toolkit: calibration, data
//! generation, training, single-image estimation, benchmarks and
//! closed-loop flight batches.

pub mod bench;
pub mod commands;
pub mod config;
pub mod meta;

use std::fmt;

pub use config::RunConfig;

/// Exit status of a command-line usage error (clap's own code).
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_RUNTIME: i32 = 1;

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration file, flag value or config-dependent input.
    Config(String),
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<darkdepth::Error> for CliError {
    fn from(e: darkdepth::Error) -> Self {
        match e {
            darkdepth::Error::Config(m) => CliError::Config(m),
            other => CliError::Runtime(other.into()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
