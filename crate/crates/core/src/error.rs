use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A malformed record in a tabular input file. `row` is 1-based and counts
    /// data rows (the header is row 0).
    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error(
        "state space for fleet size {fleet} exceeds the exact-solver limit of {limit}; \
         use the RL solver (`solve rl`) instead"
    )]
    Capacity { fleet: usize, limit: usize },

    #[error("incompatible artifacts: {0}")]
    Incompatible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
