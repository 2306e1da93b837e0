use thiserror::Error;

/// Errors produced by the clustering, completion and certification routines.
#[derive(Debug, Error)]
pub enum UosError {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{what} did not converge (final residual {residual:e})")]
    NotConverged { what: String, residual: f64 },

    #[error("dataset format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, UosError>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(UosError::Parameter(msg.into()))
}
