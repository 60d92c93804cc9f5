use std::path::PathBuf;

/// Errors produced anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("ambiguous unwrap at {voltage} V: residual {residual:.3} rad exceeds pi/2")]
    AmbiguousUnwrap { voltage: f64, residual: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed data in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse grouping used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numeric,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::Domain(_) => ErrorClass::Config,
            Error::NumericFailure(_) | Error::Fit(_) | Error::AmbiguousUnwrap { .. } => {
                ErrorClass::Numeric
            }
            Error::InsufficientData(_)
            | Error::Protocol(_)
            | Error::Parse { .. }
            | Error::Io { .. } => ErrorClass::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
