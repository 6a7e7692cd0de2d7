use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A constructor or operation received a value that violates a stated invariant.
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    /// A branch probability left the open unit interval at the requested step size.
    #[error("{what} = {value} is outside (0, 1) at dt = {dt}{}", max_dt_hint(*.max_dt))]
    ProbabilityOutOfRange {
        what: &'static str,
        value: f64,
        dt: f64,
        max_dt: Option<f64>,
    },

    /// The informed probability left (0, 1); carries the admissible information range.
    #[error(
        "informed probability {value} is outside (0, 1) at dt = {dt}; admissible tau range is ({tau_min}, {tau_max})"
    )]
    InformedOutOfRange {
        value: f64,
        dt: f64,
        tau_min: f64,
        tau_max: f64,
    },

    /// A lattice spec failed validation while building the given step.
    #[error("step {step} inadmissible at dt = {dt} (maximal admissible dt = {max_dt:e}): {reason}")]
    InadmissibleStep {
        step: usize,
        dt: f64,
        max_dt: f64,
        reason: String,
    },

    #[error("lattice steps do not share branch factors (step {step}); the tree does not recombine")]
    NonRecombining { step: usize },

    /// The quote lies outside the prices attainable inside the root bracket.
    #[error("quote {mid} outside attainable band [{low}, {high}]")]
    OutOfBand { mid: f64, low: f64, high: f64 },

    #[error("root finder did not converge within {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
}

fn max_dt_hint(max_dt: Option<f64>) -> String {
    match max_dt {
        Some(m) => format!(" (maximal admissible dt = {m:e})"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    /// True for input/validation problems, false for numerical or solver failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::LengthMismatch { .. }
                | Error::InsufficientData(_)
        )
    }
}
