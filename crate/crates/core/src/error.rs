use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("forward matrix is not injective (smallest/largest singular value ratio {ratio:.3e}); GenFRI requires an injective forward matrix, i.e. 2M + 1 <= L with distinct sample times")]
    NotInjective { ratio: f64 },

    #[error("{0} did not converge")]
    NoConvergence(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("annihilating filter is degenerate: {found} finite roots, {needed} needed")]
    DegenerateFilter { found: usize, needed: usize },

    #[error("linear algebra failure: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
