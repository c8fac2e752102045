use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("matrix {name} contains a non-finite entry at ({row}, {col})")]
    NonFinite { name: String, row: usize, col: usize },

    #[error("invalid tolerance: {0}")]
    Tolerance(String),

    #[error("{stage} certification failed: {detail}")]
    Certification { stage: &'static str, detail: String },

    #[error("ill-conditioned spectral split: eigenvalue {re:+.3e}{im:+.3e}i lies within {gap:.1e} of the boundary Re = {boundary}")]
    IllConditionedSplit { re: f64, im: f64, gap: f64, boundary: f64 },

    #[error("pole placement impossible: unobservable eigenvalue {re:+.6}{im:+.6}i is not left of -{margin}")]
    DetectabilityViolated { re: f64, im: f64, margin: f64 },

    #[error("synthesis precondition failed: {0}")]
    Precondition(String),

    #[error("internal consistency check failed: {0}")]
    Internal(String),

    #[error("inconsistent initial condition: {row} has residual {residual:.3e}")]
    InconsistentInitial { row: String, residual: f64 },

    #[error("input constraint violated at t = {t}: {row} has residual {residual:.3e}")]
    InconsistentInput { t: f64, row: String, residual: f64 },

    #[error("input signal lacks derivative of order {order}")]
    Smoothness { order: usize },

    #[error("grid mismatch: {0}")]
    Grid(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn cert(stage: &'static str, detail: impl Into<String>) -> Self {
        Error::Certification { stage, detail: detail.into() }
    }
}
