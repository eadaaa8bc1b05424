use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("slice {slice} is not symmetric: max |A_ij - A_ji| = {deviation:e} exceeds tolerance {tolerance:e}")]
    AsymmetricSlice {
        slice: usize,
        deviation: f64,
        tolerance: f64,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite entry at slice {slice}, ({row}, {col})")]
    NonFiniteEntry { slice: usize, row: usize, col: usize },

    #[error("vector of length {len} is not p(p-1)/2 for any p")]
    LengthNotTriangular { len: usize },

    #[error("matrix is not symmetric (max deviation {0:e})")]
    NotSymmetric(f64),

    #[error("rank {rank} exceeds dimension {dim}")]
    RankTooLarge { rank: usize, dim: usize },

    #[error("cannot normalize a vector of norm {0:e}")]
    ZeroVector(f64),

    #[error("degenerate iterate: {0}")]
    DegenerateIterate(String),

    #[error("smoothing matrix is singular or not positive definite")]
    SingularSmoother,

    #[error("given initial vector has norm {norm}, expected 1 within 1e-6")]
    InvalidGivenInit { norm: f64 },

    #[error("invalid options: {0}")]
    InvalidOptions(String),

    #[error("Schur block V^T X_t V of slice {slice} is singular (condition number {condition:e})")]
    SingularSchurBlock { slice: usize, condition: f64 },

    #[error("factor {index}: {source}")]
    AtFactor {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("need at least {min} slices, got {got}")]
    TooFewSlices { got: usize, min: usize },

    #[error("series carries no change signal (CUSUM norm {cusum_norm:e}, data norm {data_norm:e})")]
    DegenerateSeries { cusum_norm: f64, data_norm: f64 },

    #[error("adversary emitted perturbation of norm {norm:e} over budget {budget:e}")]
    BudgetExceeded { norm: f64, budget: f64 },

    #[error("invalid probability: {0}")]
    InvalidProbability(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is degenerate (zero)")]
    DegenerateMatrix,

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("asymmetric input at ({i}, {j}) of slice {t}: {a} vs {b}")]
    AsymmetricInput {
        t: String,
        i: usize,
        j: usize,
        a: f64,
        b: f64,
    },

    #[error("inconsistent dimensions: {0}")]
    InconsistentDimensions(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_factor(index: usize, err: Error) -> Error {
        Error::AtFactor {
            index,
            source: Box::new(err),
        }
    }

    /// Whether the error stems from malformed user input rather than a numerical failure.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::AtFactor { source, .. } => source.is_input_error(),
            Error::AsymmetricSlice { .. }
            | Error::NonFiniteEntry { .. }
            | Error::LengthNotTriangular { .. }
            | Error::Parse { .. }
            | Error::AsymmetricInput { .. }
            | Error::InconsistentDimensions(_)
            | Error::Config(_)
            | Error::InvalidOptions(_)
            | Error::InvalidParameter(_)
            | Error::InvalidProbability(_)
            | Error::RankTooLarge { .. }
            | Error::DimensionMismatch(_)
            | Error::TooFewSlices { .. }
            | Error::InvalidGivenInit { .. }
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_) => true,
            _ => false,
        }
    }
}
