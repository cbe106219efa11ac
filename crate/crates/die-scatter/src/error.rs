//! Crate-wide error type and the process exit codes used by the CLI.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("scatterer extends beyond the computational grid: {0}")]
    OutOfDomain(String),

    #[error("argument outside the function domain: {0}")]
    Domain(String),

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),

    #[error("GMRES breakdown: {0}")]
    Breakdown(String),

    #[error("iteration did not converge: {0}")]
    NonConverged(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("orthonormalization found a rank-deficient basis: {0}")]
    DegenerateBasis(String),

    #[error("series truncation too short: {0}")]
    Truncation(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("validation failed: {0}")]
    ValidationFailed(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// CLI exit code: 0 success, 2 non-convergence, 3 invalid config,
    /// 4 resource cap, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonConverged(_) | Error::ValidationFailed(_) | Error::Breakdown(_) => 2,
            Error::InvalidConfig(_) | Error::Json(_) | Error::InvalidParameter(_) => 3,
            Error::ResourceCap(_) => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
