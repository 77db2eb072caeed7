use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("constraint violated: {0}")]
    ConstraintViolation(String),

    #[error("singular denominator: |det| = {det:e} below threshold {threshold:e} (point leaves the chart)")]
    SingularDenominator { det: f64, threshold: f64 },

    #[error("z is singular: |det z| = {det:e} below threshold {threshold:e}")]
    SingularZ { det: f64, threshold: f64 },

    #[error("y is rank deficient: rank {rank} < d = {d}")]
    RankDeficientY { rank: usize, d: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("divergence suspected: running estimates {estimates:?}")]
    DivergenceSuspected { estimates: Vec<f64> },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
