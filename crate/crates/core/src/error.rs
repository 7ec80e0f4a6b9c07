use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = MbrError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum MbrError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("utility backend `{backend}` failed: {message}")]
    Backend { backend: String, message: String },

    #[error("protocol error: {0}")]
    Protocol(String),

    /// A broken internal invariant, e.g. a bootstrap lookup of an unscored pair.
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl MbrError {
    pub fn validation(msg: impl Into<String>) -> Self {
        MbrError::Validation(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MbrError::Io {
            path: path.into(),
            source,
        }
    }

    /// Prefix the message with the instance the error occurred in.
    pub fn in_instance(self, id: &str) -> Self {
        match self {
            MbrError::Validation(m) => MbrError::Validation(format!("instance `{id}`: {m}")),
            MbrError::Backend { backend, message } => MbrError::Backend {
                backend,
                message: format!("instance `{id}`: {message}"),
            },
            MbrError::Protocol(m) => MbrError::Protocol(format!("instance `{id}`: {m}")),
            MbrError::Internal(m) => MbrError::Internal(format!("instance `{id}`: {m}")),
            other => other,
        }
    }

    /// Process exit code: 1 validation, 2 I/O, 3 backend or protocol failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            MbrError::Parse { .. } | MbrError::Validation(_) => 1,
            MbrError::Io { .. } => 2,
            MbrError::Backend { .. } | MbrError::Protocol(_) => 3,
            MbrError::Internal(_) => 70,
        }
    }
}
