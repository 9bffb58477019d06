//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced while validating inputs or running the estimation
/// routines. Diagnostic payloads are reported in `f64` regardless of the
/// working scalar type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid observation: {0}")]
    InvalidObservation(String),

    #[error("invalid cluster `{id}`: {reason}")]
    InvalidCluster { id: String, reason: String },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid baseline: {0}")]
    InvalidBaseline(String),

    #[error("pair correlation {value} outside [0, {max}]")]
    CorrelationOutOfRange { value: f64, max: f64 },

    #[error("invalid correlation structure: {0}")]
    InvalidCorrelation(String),

    #[error(
        "invalid correlation structure: element-wise square root is not \
         positive semidefinite (smallest eigenvalue {min_eigenvalue:e})"
    )]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("baseline support violation: failure at t={time} has no baseline jump")]
    BaselineSupport { time: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate design: weighted covariate variance vanishes on every risk set")]
    DegenerateDesign,

    #[error(
        "Newton iteration did not converge after {iters} iterations \
         (gradient norm {grad_norm:e})"
    )]
    NewtonDidNotConverge { iters: usize, grad_norm: f64 },

    #[error("E-step degenerate pair: conditional-expectation denominator vanished")]
    DegeneratePair,

    #[error("information singular: {0}")]
    SingularInformation(String),

    #[error("non-finite value in {context} at coordinate {coordinate}")]
    NonFinite { context: String, coordinate: usize },

    #[error("linear algebra failure: {0}")]
    LinAlg(String),
}
