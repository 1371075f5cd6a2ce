//! Error type shared by the whole toolkit.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CageError {
    #[error("geometry: {0}")]
    Geometry(String),

    #[error("pattern: {0}")]
    Pattern(String),

    #[error("mesh memory estimate {estimate_mb:.1} MiB exceeds cap {cap_mb:.1} MiB")]
    MemoryCap { estimate_mb: f64, cap_mb: f64 },

    #[error("material: {0}")]
    Material(String),

    #[error("assembly: {0}")]
    Assembly(String),

    #[error("solver: {0}")]
    Solver(String),

    #[error("probable resonance: {0}")]
    Resonance(String),

    #[error("parameter: {0}")]
    Parameter(String),

    #[error("unfolding: {0}")]
    Unfolding(String),

    #[error("eigensolver: {0}")]
    Eigen(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CageError>;
