use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad or inconsistent configuration; exit code 2.
    #[error("config error: {0}")]
    Config(String),

    /// A size or count limit would be exceeded; exit code 3.
    #[error("resource cap: {0}")]
    Resource(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Resource(_) => 3,
            CliError::Io { .. } => 1,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

impl From<minkowski_content::Error> for CliError {
    fn from(e: minkowski_content::Error) -> Self {
        use minkowski_content::Error as E;
        match e {
            E::ResourceCap(_) | E::KernelTooLarge { .. } => CliError::Resource(e.to_string()),
            E::Io(source) => CliError::Io {
                path: "<io>".into(),
                source,
            },
            other => CliError::Config(other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
