use thiserror::Error;

/// Errors raised anywhere in the navigation stack.
#[derive(Debug, Error)]
pub enum NavError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("out of bounds: {0}")]
    OutOfBounds(String),

    #[error("unknown cell at row {row}, col {col}")]
    UnknownCell { row: usize, col: usize },

    #[error("geometry fault: {0}")]
    Geometry(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("singular geometry: {0}")]
    SingularGeometry(String),

    #[error("path blocked: {0}")]
    PathBlocked(String),

    #[error("filter divergence: {0}")]
    FilterDivergence(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NavError>;
