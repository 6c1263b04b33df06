use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// The trigonometric polynomial dips to zero or below, so it cannot serve
    /// as a spectral density.
    #[error("spectrum not bounded away from zero: minimum {min:.6e}")]
    NonPositiveSpectrum { min: f64 },

    /// A covariance lag beyond the stored support was requested while the
    /// tail bound is nonzero, so the value cannot be treated as exactly zero.
    #[error("lag {lag} outside covariance support of {support} lags with nonzero tail")]
    LagOutOfRange { lag: i64, support: usize },

    /// An autocovariance lag at or beyond the path length.
    #[error("lag {lag} too large for a path of {len} samples")]
    LagTooLarge { lag: usize, len: usize },

    /// A symmetric matrix that was required to be positive definite is not.
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    /// A truncation horizon too small for the requested index blocks or
    /// tolerance.
    #[error("horizon {horizon} too small: {reason}")]
    HorizonTooSmall { horizon: usize, reason: String },

    /// A prediction window incompatible with the path length; fitting needs
    /// twice the window strictly inside the sample.
    #[error("window {window} too large for a path of {len} samples (need 2*window < len)")]
    WindowTooLarge { window: usize, len: usize },

    /// Invalid numeric input: wrong sign, NaN, empty data, inconsistent
    /// configuration.
    #[error("domain error: {0}")]
    Domain(String),

    /// A run-time verification (identity check, eigenvalue floor) failed.
    #[error("verification failure: {0}")]
    Verification(String),

    /// A model description or data file could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
