//! Command-line plumbing for the frailty proportional-odds fitter: CSV
//! ingestion, fit reports, and the simulation/benchmark drivers.
//!
//! Exit-code contract: 0 success, 2 input error, 3 convergence failure.

use thiserror::Error;

pub mod commands;
pub mod input;
pub mod report;
pub mod table;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Convergence(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Convergence(_) => EXIT_CONVERGENCE,
            CliError::Internal(_) => 1,
        }
    }
}

impl From<pofrail::Error> for CliError {
    fn from(e: pofrail::Error) -> Self {
        use pofrail::Error as E;
        match e {
            E::NewtonDidNotConverge { .. } | E::DegeneratePair => {
                CliError::Convergence(e.to_string())
            }
            E::DegenerateDesign | E::SingularInformation(_) => {
                CliError::Convergence(e.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

/// Default RNG seed: `POFRAIL_SEED` when set, a fixed constant otherwise.
pub fn default_seed() -> u64 {
    std::env::var("POFRAIL_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(20260810)
}
