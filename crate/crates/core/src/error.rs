use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of the analysis pipeline.
///
/// Variants are grouped by what the caller can do about them: bad input data,
/// bad configuration or arguments, and numerical breakdown.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("invalid price for asset {asset} on {date}: {message}")]
    InvalidPrice {
        asset: String,
        date: String,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("asset {asset} has zero variance")]
    ZeroVariance { asset: String },

    #[error("index {index} out of range for {len} modes")]
    Index { index: usize, len: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("subsector {side} of mode {mode} is empty; lower u_c or skip the mode")]
    EmptySubsector { mode: usize, side: &'static str },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    /// Coarse classification used by the CLI to choose an exit status.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Numerical(_) => ErrorKind::Numerical,
            Error::Config(_) | Error::Argument(_) | Error::Domain(_) | Error::Index { .. } => {
                ErrorKind::Usage
            }
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map(|p| p.line()).unwrap_or(0);
        Error::Parse {
            line,
            message: e.to_string(),
        }
    }
}
