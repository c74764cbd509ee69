use std::path::PathBuf;

/// Error type shared by every stage of the toolkit.
///
/// Variants map onto the CLI exit-code taxonomy through [`Error::exit_code`].
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Caller supplied inputs that violate a precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// A file does not follow its declared layout.
    #[error("format error: {0}")]
    Format(String),

    /// A file parsed but contains unusable values.
    #[error("data error: {0}")]
    Data(String),

    /// A computation hit a degenerate or non-finite quantity.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 validation, 3 data/format/io, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) => 2,
            Error::Format(_) | Error::Data(_) | Error::Io { .. } | Error::Json(_) | Error::Csv(_) => 3,
            Error::Numeric(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
