use thiserror::Error;

/// Errors produced by the solvers, oracles and file handling.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed instance, placement, parameter or configuration.
    #[error("invalid input: {0}")]
    Input(String),

    /// The LP layer failed or returned a solution outside tolerance.
    #[error("LP solver failure: {0}")]
    Solver(String),

    /// The exact oracle was asked to enumerate more states than its budget allows.
    #[error("instance too large for the exact oracle: {0}")]
    OracleTooLarge(String),

    /// An internal invariant was violated. Always a bug.
    #[error("internal invariant violated: {0}")]
    Internal(String),

    /// Instance generation could not satisfy its sampling constraints.
    #[error("instance generation failed: {0}")]
    Generation(String),

    /// A sweep cell failed; identifies the cell.
    #[error("sweep cell {param}={value} seed={seed} algorithm={algorithm}: {source}")]
    Cell {
        param: String,
        value: String,
        seed: u64,
        algorithm: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }

    /// True for errors caused by the caller's data rather than by a solver.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Input(_) | Error::Io(_) | Error::Json(_) | Error::Csv(_) => true,
            Error::Cell { source, .. } => source.is_input_error(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
