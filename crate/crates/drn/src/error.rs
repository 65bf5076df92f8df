use std::path::{Path, PathBuf};

/// Errors from file formats, configuration and the experiment runner.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{path}: {message}")]
    Json { path: PathBuf, message: String },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] drn_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Exit codes of the command-line tool.
pub mod exit {
    pub const OK: u8 = 0;
    pub const USAGE: u8 = 1;
    pub const NOT_CONVERGED: u8 = 2;
    pub const NUMERIC: u8 = 3;
}

impl Error {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn json(path: &Path, e: serde_json::Error) -> Self {
        Error::Json {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }

    /// Numeric failures map to exit code 3, everything else to 1.
    pub fn exit_code(&self) -> u8 {
        use drn_core::Error as C;
        match self {
            Error::Core(
                C::NotPositiveDefinite(_)
                | C::SingularUpdate { .. }
                | C::Estimation(_)
                | C::Training { .. },
            ) => exit::NUMERIC,
            _ => exit::USAGE,
        }
    }
}
