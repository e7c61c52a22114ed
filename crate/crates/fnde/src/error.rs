use std::path::{Path, PathBuf};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] fnde_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn csv(path: &Path, source: csv::Error) -> Self {
        Error::Csv {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn format(path: &Path, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }

    /// Stable machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Core(fnde_core::Error::Diverged { .. }) => "divergence",
            Error::Core(fnde_core::Error::Singular { .. }) => "singular",
            Error::Core(fnde_core::Error::Structure { .. }) => "structure",
            Error::Core(fnde_core::Error::Invalid(_) | fnde_core::Error::WrongKind { .. }) => "invalid",
            Error::Core(_) => "numeric",
            Error::Io { .. } => "io",
            Error::Csv { .. } | Error::Format { .. } => "format",
            Error::Config(_) => "config",
        }
    }
}
