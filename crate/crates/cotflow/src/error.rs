use thiserror::Error;

/// Error variants shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or coordinate splits do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A measure violates its invariants (weights, dimensions).
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    /// A configuration value is out of its admissible range.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Transport problem has no feasible coupling (marginal masses differ).
    #[error("infeasible transport problem: {0}")]
    Infeasible(String),

    /// A NaN or infinity showed up where a finite number was required.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// Numerical routine failed (solver breakdown, simulator blow-up, ...).
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
