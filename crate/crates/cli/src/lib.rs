//! Experiment runner for the `dppmc` library: strict TOML configs, seeded
//! multi-run orchestration, CSV summaries and SVG learning curves.

pub mod aggregate;
pub mod config;
pub mod runner;
pub mod suite;
pub mod svg;

/// Errors split by the exit code they map to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<dppmc::Error> for CliError {
    fn from(e: dppmc::Error) -> Self {
        match e {
            dppmc::Error::InvalidConfig(msg) => CliError::Validation(msg),
            dppmc::Error::InvalidMixture(_) => CliError::Validation(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("i/o error: {e}"))
    }
}
