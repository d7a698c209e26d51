use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    /// `line` is 1-based; 0 means the file as a whole.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("reference solve failed: {0}")]
    Reference(String),
    #[error(transparent)]
    Core(#[from] blitz_core::BlitzError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.to_path_buf(), source }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(HarnessError::Config(msg.into()))
}
