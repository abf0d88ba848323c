use thiserror::Error;

pub type Result<T> = std::result::Result<T, IcdError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IcdError {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("data error at row {row}, column {column}: {message}")]
    DataAt {
        row: usize,
        column: String,
        message: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

impl IcdError {
    pub(crate) fn data(msg: impl Into<String>) -> Self {
        IcdError::Data(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        IcdError::Config(msg.into())
    }
}
