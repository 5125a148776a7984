use std::path::PathBuf;

/// Exit status for a successful run.
pub const EXIT_OK: i32 = 0;
/// Bad command line, configuration or parameter value.
pub const EXIT_USAGE: i32 = 2;
/// Unreadable, malformed or degenerate input data.
pub const EXIT_DATA: i32 = 3;
/// A search or size budget was exceeded.
pub const EXIT_BUDGET: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] rootcause_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Budget(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl std::fmt::Display) -> Self {
        Error::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        use rootcause_core::Error as Core;
        match self {
            Error::Usage(_) | Error::Core(Core::InvalidArgument(_)) => EXIT_USAGE,
            Error::Budget(_) | Error::Core(Core::TooLarge { .. }) => EXIT_BUDGET,
            Error::Core(_) | Error::Io { .. } | Error::Format { .. } => EXIT_DATA,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
