use std::path::{Path, PathBuf};

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config {path}: {reason}")]
    Config { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error(transparent)]
    Pipeline(#[from] push2seg_core::Error),
    #[error("{0}")]
    Mismatch(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, reason: impl Into<String>) -> Self {
        CliError::Format {
            path: path.to_path_buf(),
            reason: reason.into(),
        }
    }

    /// Process exit status: 2 usage, 3 config, 4 input/output, 5 pipeline.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Config { .. } => 3,
            CliError::Io { .. } | CliError::Format { .. } => 4,
            CliError::Pipeline(push2seg_core::Error::InvalidParameter { .. }) => 3,
            CliError::Pipeline(_) | CliError::Mismatch(_) => 5,
        }
    }
}
