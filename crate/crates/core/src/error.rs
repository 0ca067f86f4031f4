use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice size M={0}: must be even and in 4..=128")]
    InvalidLatticeSize(usize),

    #[error("fields live on different lattices (M={left} vs M={right})")]
    LatticeMismatch { left: usize, right: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("zero frequency is not part of the lattice")]
    ZeroFrequency,

    #[error("time grids do not match: {0}")]
    GridMismatch(String),

    #[error("infeasible fixed-point parameters: {0}")]
    Infeasible(String),

    #[error("Picard iteration diverged after {iterations} iterations (last ratio {last_ratio})")]
    Divergence { iterations: usize, last_ratio: f64 },

    #[error("denominator vanishes: {0}")]
    ZeroDenominator(&'static str),

    #[error("non-finite norm at t={t}: {quantity}")]
    NonFinite { t: f64, quantity: String },

    #[error("snapshot parse error on line {line}: {msg}")]
    Snapshot { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
