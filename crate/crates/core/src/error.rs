use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid disorder specification: {0}")]
    InvalidSpec(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("parity violation: {0}")]
    Parity(String),

    #[error("site (t={t}, pos={pos:?}) is outside the environment window")]
    OutOfWindow { t: i64, pos: [i64; 2] },

    #[error("environment window too small: {0}")]
    WindowTooSmall(String),

    #[error("I - V is not positive definite: minimum eigenvalue {min_eigenvalue:e} (tolerance {tolerance:e})")]
    NotPositiveDefinite { min_eigenvalue: f64, tolerance: f64 },

    #[error("conditioning event has probability zero: {0}")]
    ZeroProbability(String),

    #[error("series truncation insufficient: error bound {bound:e} exceeds tolerance {tolerance:e}")]
    Truncation { bound: f64, tolerance: f64 },

    #[error("bound requested outside its validity regime: {0}")]
    Regime(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),
}

pub type Result<T> = std::result::Result<T, Error>;
