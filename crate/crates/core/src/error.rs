use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the model, numerics, theory and harness layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("integration broke down at t = {t}: {reason}")]
    IntegrationBreakdown { t: f64, reason: String },

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("unsupported subspace dimension d = {0} (only d = 1 is supported here)")]
    UnsupportedDimension(usize),

    #[error("time grid mismatch: {0}")]
    GridMismatch(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
