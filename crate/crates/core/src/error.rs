use thiserror::Error;

/// Errors surfaced by the spectral solver and trajectory machinery.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid mode cut: {0}")]
    InvalidCut(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("solution blew up at t = {time}: {detail}")]
    BlowUp { time: f64, detail: String },

    #[error("bound undefined: {0}")]
    UndefinedBound(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("s-grid mismatch: {0}")]
    SGridMismatch(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
