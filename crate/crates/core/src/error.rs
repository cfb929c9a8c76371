use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A size argument is outside the supported range.
    #[error("bounds: {0}")]
    Bounds(String),

    #[error("parameter: {0}")]
    Parameter(String),

    #[error("generation: {0}")]
    Generation(String),

    /// Input is outside the mathematical domain of the operation.
    #[error("domain: {0}")]
    Domain(String),

    #[error("precondition: {0}")]
    Precondition(String),

    #[error("shape: {0}")]
    Shape(String),

    #[error("format: {0}")]
    Format(String),

    #[error("version: found {found}, supported {supported}")]
    Version { found: u32, supported: u32 },

    #[error("unavailable: {0}")]
    Unavailable(String),

    #[error("io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable category, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Bounds(_) => "bounds",
            Error::Parameter(_) => "parameter",
            Error::Generation(_) => "generation",
            Error::Domain(_) => "domain",
            Error::Precondition(_) => "precondition",
            Error::Shape(_) => "shape",
            Error::Format(_) => "format",
            Error::Version { .. } => "version",
            Error::Unavailable(_) => "unavailable",
            Error::Io { .. } => "io",
        }
    }
}
