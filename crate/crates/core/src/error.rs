use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = KpError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum KpError {
    #[error("{path}:{line}: expected 3 tab-separated fields, found {found}")]
    Parse {
        path: PathBuf,
        line: usize,
        found: usize,
    },

    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("id out of range: {0}")]
    OutOfRange(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("negative sampling saturated after {attempts} attempts ({accepted} of {requested} accepted); vocabulary too dense")]
    SamplingSaturated {
        attempts: usize,
        accepted: usize,
        requested: usize,
    },

    #[error("non-finite loss at epoch {epoch}: {loss}")]
    NonFiniteLoss { epoch: usize, loss: f64 },

    #[error("diagrams do not share a baseline/cap frame ({0})")]
    FrameMismatch(String),

    #[error("exact Wasserstein limited to {limit} points, got {size}; use the sliced variant")]
    TooLarge { size: usize, limit: usize },

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("checkpoint format: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl KpError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        KpError::Io {
            path: path.into(),
            source,
        }
    }
}
