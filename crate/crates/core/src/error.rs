use thiserror::Error;

use crate::fit::FitFailure;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("hyperfine tensor is not symmetric (max |A - A^T| = {0:e} MHz)")]
    InvalidTensor(f64),

    #[error("first shell holds at most 3 nuclei, got {0}")]
    Capacity(usize),

    #[error("matrix is not Hermitian (max |H - H^dagger| = {deviation:e}, tolerance {tolerance:e})")]
    NotHermitian { deviation: f64, tolerance: f64 },

    #[error("cannot assign an m_s branch to eigenstates {states:?} (dominant weight below {threshold})")]
    AmbiguousBranch { states: Vec<usize>, threshold: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid error: {0}")]
    Grid(String),

    #[error("fit failed: {0}")]
    Fit(FitFailure),

    #[error("unbounded interval: {0}")]
    Unbounded(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("timeline error: {0}")]
    Compile(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed data at row {row}: {message}")]
    Format { row: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of a numerical procedure (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Fit(_) | Error::AmbiguousBranch { .. } | Error::Unbounded(_))
    }
}

impl From<FitFailure> for Error {
    fn from(f: FitFailure) -> Self {
        Error::Fit(f)
    }
}
