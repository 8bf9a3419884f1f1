use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid density: {0}")]
    InvalidDensity(String),
    #[error("invalid scale: {0}")]
    InvalidScale(String),
    #[error("Fourier bound violation: no positive decay constant on the grid ({0})")]
    BoundViolation(String),
    #[error("site {site} out of represented range {lo}..={hi}")]
    OutOfRange { site: i64, lo: i64, hi: i64 },
    #[error("spec violation: {0}")]
    SpecViolation(String),
    #[error("truncation depth too small: {0}")]
    Truncation(String),
    #[error("integer cap exceeded at k={k}; partial output has {len} terms")]
    SequenceCap { k: usize, len: usize },
    #[error("window not covered: {0}")]
    Coverage(String),
    #[error("degenerate orbit: {0}")]
    OrbitDegeneracy(String),
    #[error("precision exhausted after {safe_k} convergents")]
    Precision { safe_k: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error("fit range error: {0}")]
    FitRange(String),
    #[error("quadrature resolution error: {0}")]
    Resolution(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
