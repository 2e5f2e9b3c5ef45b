use thiserror::Error;

/// Errors surfaced by the bond laboratory.
#[derive(Error, Debug)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("accrual date {date} precedes dated date {dated}")]
    BeforeDatedDate {
        date: chrono::NaiveDate,
        dated: chrono::NaiveDate,
    },

    #[error("unsupported day-count basis `{0}`")]
    UnsupportedDayCount(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("identification failure: {0}")]
    Identification(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

impl Error {
    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
