use thiserror::Error;

use crate::dsl::DslError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Dsl(#[from] DslError),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("non-finite state at step {index}")]
    BlowUp { index: usize },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("not generic: {0}")]
    NotGeneric(String),

    #[error("threshold case refused: {0}")]
    AtThreshold(String),

    #[error("timeout: no exit before t = {t_max}")]
    Timeout { t_max: f64 },

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
