use thiserror::Error;

/// Errors raised by state construction, synthesis and verification.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid filter: {0}")]
    InvalidFilter(String),

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The requested success probability lies outside the range the filter
    /// family can reach.
    #[error("success probability {requested} is unreachable: {reason}")]
    Unreachable { requested: f64, reason: String },

    #[error("filter annihilates the state (zero success probability)")]
    ZeroSuccess,

    #[error("input state is not pure; use the Tsallis optimizer for mixed states")]
    NotPure,

    #[error("input state is incoherent; a diagonal filter cannot create coherence")]
    NoCoherence,

    #[error("no feasible grid point within tolerance {tolerance} of P_S = {target}")]
    Infeasible { target: f64, tolerance: f64 },

    #[error("Kraus operators violate Σ W†W ≤ I (excess {0:.3e})")]
    NotTraceDecreasing(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
