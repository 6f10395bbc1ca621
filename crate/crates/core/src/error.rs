use thiserror::Error;

/// Errors raised by every fallible operation in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DbnError {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("graph contains a cycle through nodes {cycle:?}")]
    Cycle { cycle: Vec<usize> },

    #[error("value out of range: {0}")]
    Range(String),

    /// Operation requested on the wrong value domain (e.g. BDe on continuous data).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("problem size exceeds guard: {0}")]
    Size(String),

    #[error("underdetermined fit: {rows} usable rows for {params} parameters")]
    Underdetermined { rows: usize, params: usize },

    #[error("optimizer error: {0}")]
    Optimizer(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("time limit exceeded")]
    Timeout,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, DbnError>;

impl From<std::io::Error> for DbnError {
    fn from(e: std::io::Error) -> Self {
        DbnError::Io(e.to_string())
    }
}

impl From<csv::Error> for DbnError {
    fn from(e: csv::Error) -> Self {
        DbnError::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for DbnError {
    fn from(e: serde_json::Error) -> Self {
        DbnError::Parse(e.to_string())
    }
}
