use thiserror::Error;

/// Errors raised by the solver and its diagnostics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid initial data: {0}")]
    InvalidData(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    /// ξ fell to or below the configured floor.
    #[error("instability at index {index}, t = {t}: xi = {xi} is below the floor {floor}")]
    Instability { index: usize, t: f64, xi: f64, floor: f64 },

    #[error("usage error: {0}")]
    Usage(String),

    /// A traced characteristic left the computed β-range.
    #[error("characteristic left the computed range at t = {t} (beta = {beta})")]
    Truncation { t: f64, beta: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
