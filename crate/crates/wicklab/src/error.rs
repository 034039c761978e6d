use thiserror::Error;

/// Errors surfaced by the wicklab library.
#[derive(Debug, Error)]
pub enum WicklabError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("separation outside the real-part cone: Re s = {re_s:.3e} at |dy| = {sep:.3e}")]
    OutsideCone { re_s: f64, sep: f64 },

    #[error("cone violation: estimated c_minus = {0:.3e} <= 0 (probe radius too large or theta too close to 0/pi)")]
    ConeViolation(f64),

    #[error("operator size {size} exceeds dense threshold {threshold}")]
    SizeOverThreshold { size: usize, threshold: usize },

    #[error("contour quadrature failure: {0}")]
    Contour(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("fit window error: {0}")]
    FitWindow(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, WicklabError>;
