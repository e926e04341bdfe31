use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("data integrity: {0}")]
    Integrity(String),

    #[error("sequence too short: need at least {needed} points, got {got}")]
    Length { needed: usize, got: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid shift spec: {0}")]
    Spec(String),

    #[error("cannot split: {0}")]
    Split(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("{stage} diverged at epoch {epoch}: {msg}")]
    Training {
        stage: &'static str,
        epoch: usize,
        msg: String,
    },

    #[error("pipeline: missing stage `{0}`")]
    MissingStage(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
