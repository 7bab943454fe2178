use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("missing depth sidecar for frame {frame}: {path}")]
    MissingSidecar { frame: String, path: PathBuf },
    #[error(transparent)]
    Core(#[from] handpose_core::Error),
}

/// Coarse failure class; selects the process exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Category {
    Config,
    Data,
    Computation,
}

impl Category {
    pub fn label(self) -> &'static str {
        match self {
            Category::Config => "config error",
            Category::Data => "data error",
            Category::Computation => "computation error",
        }
    }

    /// 2 is left to argument parsing.
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Config => 3,
            Category::Data => 4,
            Category::Computation => 5,
        }
    }
}

impl Error {
    pub fn category(&self) -> Category {
        match self {
            Error::Config(_) => Category::Config,
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::Format { .. }
            | Error::MissingSidecar { .. } => Category::Data,
            Error::Core(handpose_core::Error::InvalidParameter(_)) => Category::Config,
            Error::Core(handpose_core::Error::Tensor(_)) => Category::Data,
            Error::Core(_) => Category::Computation,
        }
    }

    pub(crate) fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
        move |source| Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn format(path: &Path, message: impl Into<String>) -> Error {
        Error::Format {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }
}
