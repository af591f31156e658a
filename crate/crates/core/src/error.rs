use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("truncation weight {weight:.3e} exceeds bound {bound:.3e}")]
    Truncation { weight: f64, bound: f64 },

    #[error("quadrature with {points} points is not exact for frequency spread {spread} (need more than {spread})")]
    Quadrature { points: usize, spread: i64 },

    #[error("empty bin selection")]
    EmptySelection,

    #[error("localisation sequence is empty")]
    EmptySequence,

    #[error("covariance defect {0:.3e} exceeds tolerance")]
    NotCovariant(f64),
}
