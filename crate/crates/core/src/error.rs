use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the model and solver layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("inconsistent observables: {0}")]
    Infeasible(String),

    #[error("unknown transition `{0}`")]
    UnknownTransition(String),

    #[error("unknown level `{0}`")]
    UnknownLevel(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("step size underflow in segment {segment} at t = {time:e} s")]
    StepUnderflow { segment: usize, time: f64 },

    #[error("state invariant violated after segment {segment}: {reason}")]
    InvariantBreach { segment: usize, reason: String },

    #[error("fit `{model}` failed: {reason}")]
    FitFailed { model: String, reason: String },

    #[error("insufficient statistics: {0}")]
    InsufficientStatistics(String),

    #[error("noise sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("calibration did not converge after {iterations} iterations: {reason}")]
    NoConvergence { iterations: usize, reason: String },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors that come from bad inputs rather than numerics.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::InvalidParameter { .. }
            | Error::Infeasible(_)
            | Error::UnknownTransition(_)
            | Error::UnknownLevel(_)
            | Error::Empty(_) => true,
            Error::Sample { source, .. } => source.is_input_error(),
            _ => false,
        }
    }
}

pub(crate) fn ensure_finite(field: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be finite, got {value}")))
    }
}

pub(crate) fn ensure_positive(field: &str, value: f64) -> Result<()> {
    ensure_finite(field, value)?;
    if value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be > 0, got {value}")))
    }
}

pub(crate) fn ensure_non_negative(field: &str, value: f64) -> Result<()> {
    ensure_finite(field, value)?;
    if value >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be >= 0, got {value}")))
    }
}

pub(crate) fn ensure_unit_interval(field: &str, value: f64) -> Result<()> {
    ensure_finite(field, value)?;
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must lie in [0, 1], got {value}")))
    }
}
