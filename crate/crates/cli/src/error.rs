use std::path::PathBuf;

use icd_core::IcdError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("`{key}`: {source}")]
    Core {
        key: String,
        #[source]
        source: IcdError,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(key: &str, message: impl Into<String>) -> Self {
        CliError::Config {
            key: key.to_string(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 config, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Io { .. } => 3,
            CliError::Core { source, .. } => match source {
                IcdError::Config(_) | IcdError::Shape(_) => 2,
                IcdError::Parse(_)
                | IcdError::DataAt { .. }
                | IcdError::Data(_)
                | IcdError::Range(_) => 3,
                IcdError::Numerical(_) | IcdError::Degenerate(_) => 4,
            },
        }
    }
}

/// Attach the config key responsible for a core failure.
pub trait Context<T> {
    fn at(self, key: &str) -> Result<T>;
}

impl<T> Context<T> for icd_core::Result<T> {
    fn at(self, key: &str) -> Result<T> {
        self.map_err(|source| CliError::Core {
            key: key.to_string(),
            source,
        })
    }
}
