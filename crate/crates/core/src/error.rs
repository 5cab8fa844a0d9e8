use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// `Validation` covers bad inputs or configuration (CLI exit code 2); the
/// remaining variants are runtime failures (exit code 1).
#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Validation(String),

    #[error("design matrix is rank deficient ({columns} columns, numerical rank {rank})")]
    RankDeficient { columns: usize, rank: usize },

    #[error("degenerate basis: {0}")]
    DegenerateBasis(String),

    #[error("optimisation failed: {0}")]
    Optimisation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("return level below threshold (T * n_y * zeta_u = {0} <= 1)")]
    BelowThreshold(f64),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
