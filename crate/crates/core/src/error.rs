use crate::disorder::LatticeSite;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("pole: {0}")]
    Pole(String),
    #[error("coincident points: kernel has a logarithmic singularity at z = z'")]
    Coincidence,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("site {0} is not present in the disorder field")]
    MissingSite(LatticeSite),
    #[error("near-singular linear system (condition estimate {condition:.3e})")]
    Singular { condition: f64 },
    #[error("no regularizer r <= {r_max} achieved contraction norm < 1/2 (best {best:.4})")]
    NoContraction { r_max: f64, best: f64 },
    #[error("band {band}: found {found} eigenvalues, expected {expected}")]
    CountMismatch {
        band: u32,
        expected: usize,
        found: usize,
    },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("overflow: {0}")]
    Overflow(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
