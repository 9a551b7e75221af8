use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("data: {0}")]
    Data(String),
    #[error("model: {0}")]
    Model(String),
    #[error("eval: {0}")]
    Eval(String),
    #[error("{0}")]
    Check(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit code. 2 is left to argument parsing.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 3,
            CliError::Io { .. } => 4,
            CliError::Data(_) => 5,
            CliError::Model(_) => 6,
            CliError::Eval(_) => 7,
            CliError::Check(_) => 8,
        }
    }
}

impl From<actok_core::trajectory::DatasetError> for CliError {
    fn from(e: actok_core::trajectory::DatasetError) -> Self {
        match e {
            actok_core::trajectory::DatasetError::Io { path, source } => {
                CliError::Io { path, source }
            }
            other => CliError::Data(other.to_string()),
        }
    }
}

/// Policy errors, with `path` naming the file behind any I/O failure.
pub fn policy_error(path: &Path, e: actok_core::policy::PolicyError) -> CliError {
    match e {
        actok_core::policy::PolicyError::Io(source) => CliError::io(path, source),
        other => CliError::Model(other.to_string()),
    }
}
