use num_complex::Complex64 as C64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every contract violation the library can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("index {index} out of range for dimension {dim}")]
    InvalidIndex { index: usize, dim: usize },

    #[error("truncation too small: amplitude {amplitude} needs dim >= {required:.1}, got {dim}")]
    TruncationTooSmall { amplitude: f64, required: f64, dim: usize },

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("couplings cannot be matched: {0}")]
    Unmatchable(String),

    #[error("invalid Raman intensity {0}: must be > 0")]
    InvalidIntensity(f64),

    #[error("photon truncation {required} for intensity {intensity} exceeds limit {limit}")]
    InfeasibleTruncation { intensity: f64, required: usize, limit: usize },

    #[error("signal prefactor vanishes: rho_e == rho_g makes the characteristic function unobservable")]
    Unobservable,

    #[error("ill-conditioned probe points (condition > {limit}): {points:?}")]
    IllConditioned { limit: f64, points: Vec<(C64, f64)> },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("improbable outcome: probability {probability:e} below 1e-12")]
    ImprobableOutcome { probability: f64 },

    #[error("parse error: {0}")]
    Parse(String),
}
