use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed arguments to an in-process call (shape or domain mismatch).
    #[error("input error: {0}")]
    Input(String),

    /// A configuration that cannot be fitted or simulated.
    #[error("config error: {0}")]
    Config(String),

    /// Dataset contents failed validation while loading.
    #[error("data error at row {row}, column {column}: {message}")]
    Data {
        row: usize,
        column: usize,
        message: String,
    },

    /// The requested computation is too large to enumerate.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
