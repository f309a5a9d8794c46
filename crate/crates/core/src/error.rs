use thiserror::Error;

/// Errors raised by estimators, rate evaluations and the Monte Carlo harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension {d} is too small (need at least {min})")]
    DimensionTooSmall { d: usize, min: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("witness `{label}` is not a member of {class}")]
    WitnessOutsideClass { label: String, class: String },

    #[error("functional {0} is not constant on the support of the prior")]
    NonConstantFunctional(String),

    #[error("numeric overflow: {0}")]
    NumericOverflow(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            name,
            format!("must be positive and finite, got {value}"),
        ))
    }
}
