use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its admissible set (negative weight, δ ≤ 0, ...).
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// An argument lies outside the mathematical domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// An iterative numeric routine failed to reach its target.
    #[error("numeric failure: {message} (achieved {achieved:.3e})")]
    Numeric { message: String, achieved: f64 },

    #[error("calibration model is for `{model}`, not `{requested}`")]
    SpecMismatch { model: String, requested: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported model file version {found} (expected {expected})")]
    Version { found: String, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
