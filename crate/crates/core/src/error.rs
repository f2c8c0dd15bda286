use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid too small: n = {n} (need n >= 8)")]
    GridTooSmall { n: usize },

    #[error("grid length must be positive and finite, got {length}")]
    InvalidLength { length: f64 },

    #[error("field length {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("{what} must be positive, found {value} at index {index}")]
    NonPositive {
        what: &'static str,
        index: usize,
        value: f64,
    },

    #[error("negative value {value} at index {index}")]
    Negative { index: usize, value: f64 },

    #[error("invalid step configuration: {0}")]
    InvalidSteps(String),

    #[error(
        "steps collided at t = {t:e}: minimum terrace width {min_width:e} below floor {floor:e}"
    )]
    CollisionDetected { t: f64, min_width: f64, floor: f64 },

    #[error("step size underflow at t = {t:e}: dt = {dt:e} < dt_min = {dt_min:e}")]
    StepSizeUnderflow { t: f64, dt: f64, dt_min: f64 },

    #[error("regularized slope lost positivity: u = {value} at index {index}")]
    PositivityLost { index: usize, value: f64 },

    #[error("linear system is singular or ill-conditioned (residual {residual:e})")]
    SingularSystem { residual: f64 },

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{source} (at t = {t:e})")]
    AtTime {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("{formulation} formulation failed: {source}")]
    Formulation {
        formulation: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn at(self, t: f64) -> Self {
        match self {
            e @ (Error::AtTime { .. }
            | Error::StepSizeUnderflow { .. }
            | Error::CollisionDetected { .. }) => e,
            e => Error::AtTime {
                t,
                source: Box::new(e),
            },
        }
    }

    /// Innermost error, with time and formulation wrappers stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtTime { source, .. } | Error::Formulation { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for failures of the numerics (collision, underflow, NaN, singular solve).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::NonFinite { .. }
                | Error::CollisionDetected { .. }
                | Error::StepSizeUnderflow { .. }
                | Error::SingularSystem { .. }
                | Error::PositivityLost { .. }
        )
    }
}
