use thiserror::Error;

/// Errors produced by the economic-order library.
#[derive(Debug, Error)]
pub enum Error {
    /// An occupancy vector does not match the grid it is evaluated on.
    #[error("occupancy has {found} entries but the grid has {expected} levels")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// No economic order satisfies the firm-count and revenue constraints.
    #[error("infeasible economy: {0}")]
    Infeasible(String),

    /// Exhaustive enumeration was refused because the outcome space is too large.
    #[error("enumeration refused: up to {bound} outcomes exceeds the cap of {cap}")]
    CapExceeded { bound: String, cap: u64 },

    /// A Bose-Einstein denominator vanished or turned negative.
    #[error("singularity at level {level}: exponent {exponent} must be positive")]
    Singularity { level: usize, exponent: f64 },

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed input data, with the 1-based line it was found on.
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
