use thiserror::Error;

#[derive(Debug, Error)]
pub enum FtfpError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("infeasible solution: {0}")]
    Infeasible(String),

    #[error("solution is not complete: site {site}, client {client} has 0 < x < y")]
    NotComplete { site: usize, client: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("enumeration bound exceeded: {needed} > {limit}")]
    BoundExceeded { needed: String, limit: u64 },

    #[error("LP solver failure: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for FtfpError {
    fn from(e: serde_json::Error) -> Self {
        FtfpError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, FtfpError>;
