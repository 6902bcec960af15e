use thiserror::Error;

use crate::radial::GeneratorKind;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error(
        "degenerate point{}: squared Mahalanobis distance {t:e} is below 1e-12",
        row.map(|r| format!(" at row {r}")).unwrap_or_default()
    )]
    DegeneratePoint { row: Option<usize>, t: f64 },

    #[error("scale factor is singular or not a valid Cholesky factor: {0}")]
    Singular(String),

    #[error("the {0} radial generator has no finite moments")]
    NoMoment(GeneratorKind),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("fixed-point location update stalled: weight sum {0:e}")]
    StalledStep(f64),

    #[error("log-likelihood became non-finite at iteration {iter}")]
    NonFinite { iter: usize, trace: Vec<f64> },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Attach a data row index to a degenerate-point error.
    pub(crate) fn at_row(self, row: usize) -> Self {
        match self {
            Error::DegeneratePoint { t, .. } => Error::DegeneratePoint { row: Some(row), t },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
