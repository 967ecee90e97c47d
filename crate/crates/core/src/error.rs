use thiserror::Error;

/// Errors produced by problem generation, the solvers and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),

    #[error("invalid anchors: {0}")]
    InvalidAnchor(String),

    #[error("brute force search limited to {max} free indices, got {got}")]
    SizeGuard { got: usize, max: usize },

    #[error("unsupported parameter: {0}")]
    Unsupported(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{failed} of {total} trials failed, above the 1% budget")]
    FailureBudget { failed: usize, total: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
