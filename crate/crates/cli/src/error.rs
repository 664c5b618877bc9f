use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] fourier_head::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing file: {0}")]
    MissingFile(PathBuf),

    #[error("{0}")]
    Usage(String),

    #[error("manifest check failed: {0}")]
    Manifest(String),
}

impl CliError {
    /// 0 success, 1 usage/config, 2 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(fourier_head::Error::Diverged { .. }) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
