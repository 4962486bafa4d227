use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// The evaluation point sits on (or numerically at) a pole of the resolvent.
    #[error("evaluation point within {distance:e} of eigenvalue {eigenvalue}")]
    PoleProximity {
        eigenvalue: Complex64,
        distance: f64,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("divergent bound: {0}")]
    Divergence(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("schema error: field `{0}` missing or malformed")]
    Schema(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
