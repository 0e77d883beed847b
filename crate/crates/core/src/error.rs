use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced anywhere in the workbench.
///
/// Variants are grouped so the command-line front end can map them onto
/// exit codes: configuration problems, data problems, and everything else.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error at row {row}, column `{column}`: {message}")]
    Cell {
        row: usize,
        column: String,
        message: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("series too short: need at least {needed} observations, got {actual}")]
    SeriesTooShort { needed: usize, actual: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for errors caused by malformed or inconsistent input data.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Cell { .. }
                | Error::Data(_)
                | Error::MissingColumn(_)
                | Error::Csv(_)
                | Error::SeriesTooShort { .. }
        )
    }
}
