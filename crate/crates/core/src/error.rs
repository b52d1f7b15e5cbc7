use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("pole or zero hit: {0}")]
    Pole(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("invariant subspace leakage {leakage:.3e} exceeds tolerance {tol:.1e}")]
    Leakage { leakage: f64, tol: f64 },

    #[error("size limit exceeded: {0}")]
    TooLarge(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("degenerate result: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
