use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid signature: {0}")]
    InvalidSignature(String),

    #[error("grid of {g} points per dimension is below the Nyquist minimum {min}")]
    BelowNyquist { g: usize, min: usize },

    #[error(
        "under-resolved grid: base {base:.17e}, refined {refined:.17e}, relative change {change:.3e} exceeds {tol:.3e}"
    )]
    UnderResolved {
        base: f64,
        refined: f64,
        change: f64,
        tol: f64,
    },

    #[error("boost center must have integer components")]
    NonIntegerCenter,

    #[error("quadrature needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),

    #[error("exponent p = {0} is below 2")]
    ExponentBelowTwo(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),

    #[error("a scaling fit needs at least 3 points, got {0}")]
    InsufficientPoints(usize),

    #[error("exact resonance evaluation unavailable: {0}")]
    ExactUnavailable(String),

    #[error("malformed field data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
