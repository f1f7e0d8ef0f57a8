//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input is outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Vector lengths do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Calibration data cannot determine the model parameters.
    #[error("rank-deficient calibration data: {0}")]
    RankDeficient(String),

    /// The power law with a zero exponent has no inverse.
    #[error("model with exponent a = 0 is not invertible")]
    NonInvertible,

    /// A configuration value or combination is invalid.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// The part cannot be sliced within the process envelope.
    #[error("geometry infeasible: {0}")]
    GeometryInfeasible(String),

    /// A planned deposition cannot be realized within the speed bounds.
    #[error("plan infeasible: {0}")]
    PlanInfeasible(String),

    /// The velocity solver could not produce a usable profile.
    #[error("solver failure: {0}")]
    Solver(String),

    /// A text input could not be parsed; `line` is 1-based.
    #[error("{path}: parse error on line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Traces passed to a comparison do not line up.
    #[error("traces are not comparable: {0}")]
    Comparison(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
