use std::path::PathBuf;

use crate::diffusion::TinyDenoiser;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("correspondence mismatch: {0}")]
    Correspondence(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("invalid noise schedule: {0}")]
    InvalidSchedule(String),

    #[error("diffusion step {step} outside schedule range 0..={max}")]
    Step { step: usize, max: usize },

    #[error("denoiser interface violation: {0}")]
    InterfaceViolation(String),

    /// Training produced a non-finite loss. Carries the last weights whose
    /// loss was finite.
    #[error("training diverged at epoch {epoch}: {reason}")]
    TrainingFailure {
        epoch: usize,
        reason: String,
        last_stable: Box<TinyDenoiser>,
    },

    #[error("invalid shape spec: {0}")]
    Spec(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("malformed PLY {path}: {reason}")]
    Ply { path: PathBuf, reason: String },

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
