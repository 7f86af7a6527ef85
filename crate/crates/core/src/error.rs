use alloc::string::String;

/// Errors raised by the spectral regularization toolkit.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("length mismatch for {what}: expected {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("retained mode {0} has a zero eigenvalue")]
    ZeroEigenvalue(usize),

    #[error("beta is undefined for an explicit spectrum; supply it with `Spectrum::with_beta`")]
    BetaUndefined,

    #[error("s = {s} lies within the threshold guard band around r - (beta + 1)/2 = {threshold}")]
    ThresholdRegime { s: f64, threshold: f64 },

    #[error("degenerate L-curve: {0}")]
    DegenerateCurve(String),

    #[error("selection undefined: {0}")]
    SelectionUndefined(String),

    #[error("too few points: need {needed}, have {have}")]
    TooFewPoints { needed: usize, have: usize },

    #[error("non-positive value {value} at index {index}")]
    NonPositive { index: usize, value: f64 },

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),

    #[error("every eigenvalue falls below the rank cutoff")]
    EmptySpectrum,
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::LengthMismatch { what, expected, found })
    }
}
