use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config {path}: {msg}")]
    Config { path: PathBuf, msg: String },
    #[error("missing prerequisite stage `{0}`; run it first")]
    MissingStage(String),
    #[error(
        "output directory {0} is locked by another run (remove the lock file if that run is gone)"
    )]
    Locked(PathBuf),
    #[error("{0}")]
    Core(#[from] ctp_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit status: 1 for configuration problems, 2 for a missing
    /// prerequisite stage, 3 for everything else.
    pub fn exit_code(&self) -> i32 {
        use ctp_core::Error as E;
        match self {
            CliError::Config { .. } => 1,
            CliError::MissingStage(_) => 2,
            CliError::Core(E::MissingStage(_)) => 2,
            CliError::Core(E::Config(_) | E::Spec(_) | E::Parse { .. } | E::Json(_)) => 1,
            _ => 3,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
