use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Component occupancy fell below the occupancy floor.
    #[error("component {k} is degenerate (occupancy {occupancy:e} below floor)")]
    DegenerateComponent { k: usize, occupancy: f64 },

    #[error("covariance of component {k} is not positive definite after flooring")]
    SingularCovariance { k: usize },

    #[error("iterate diverged at step {step}")]
    Divergence { step: u64 },

    #[error("initialization window is empty")]
    EmptyWindow,

    #[error("initialization window has {len} points, need at least {k}")]
    WindowTooShort { len: usize, k: usize },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    /// Malformed input file; `line` is 1-based.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::DegenerateComponent { .. }
                | Error::SingularCovariance { .. }
                | Error::Divergence { .. }
                | Error::NonFinite(_)
        )
    }
}
