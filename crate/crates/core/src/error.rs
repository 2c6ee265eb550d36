use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the selection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("non-numeric cell at row {row}, column `{column}`: {value:?}")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("zero-variance column `{0}`")]
    ZeroVariance(String),
    #[error("dataset has no covariates or no rows")]
    EmptyDataset,
    #[error("design submatrix for model {bits:#b} is rank deficient")]
    RankDeficient { bits: u64 },
    #[error("insufficient degrees of freedom: n = {n}, k = {k}")]
    InsufficientDof { n: usize, k: usize },
    #[error("nesting violated: R² of submodel ({r2_gamma}) exceeds R² of full model ({r2_full})")]
    NestingViolated { r2_gamma: f64, r2_full: f64 },
    #[error("enumeration cap exceeded: m = {m} > {cap}")]
    EnumerationCap { m: usize, cap: usize },
    #[error("quadrature did not converge (estimate {estimate:e}, error bound {error:e})")]
    Quadrature { estimate: f64, error: f64 },
    #[error("approximation regime violated: {0}")]
    Regime(String),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("cost guard: {reps} reps x 2^{m} models = {cost} scoring operations exceeds {limit}")]
    CostGuard {
        reps: usize,
        m: usize,
        cost: u128,
        limit: u128,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// Whether the failure belongs to the input data rather than to the numerics.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Csv(_)
                | Error::Json(_)
                | Error::MissingColumn(_)
                | Error::NonNumeric { .. }
                | Error::ZeroVariance(_)
                | Error::EmptyDataset
                | Error::RankDeficient { .. }
                | Error::DimensionMismatch { .. }
                | Error::Invalid(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
