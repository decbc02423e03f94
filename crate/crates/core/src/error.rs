use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input rejected by validation. Carries the offending row (1-based, header excluded) when known.
    #[error("{message}")]
    Validation {
        row: Option<usize>,
        driver: Option<String>,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown code {code} in column {column}")]
    UnknownCode { column: &'static str, code: usize },

    #[error("word '{0}' is not in the model vocabulary")]
    OutOfVocabulary(String),

    #[error("{0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(
        row: Option<usize>,
        driver: Option<&str>,
        message: impl Into<String>,
    ) -> Self {
        Error::Validation {
            row,
            driver: driver.map(str::to_owned),
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidInput(message.into())
    }

    /// True for errors caused by bad user input rather than internal failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation { .. }
                | Error::Config(_)
                | Error::UnknownCode { .. }
                | Error::OutOfVocabulary(_)
                | Error::InvalidInput(_)
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}
