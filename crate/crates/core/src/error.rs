use thiserror::Error;

/// Errors produced by the numerical routines and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("field has no geometry attached (equilibria and separatrix are required)")]
    MissingGeometry,

    #[error("field is not of gradient type; a potential is required")]
    NotGradient,

    #[error("implicit separatrices are not supported by this operation")]
    UnsupportedSeparatrix,

    #[error("trajectory left the escape radius {radius} at time {time}; the field may violate the inward-drift condition")]
    Divergence { radius: f64, time: f64 },

    #[error("non-finite state after {step} steps with dt = {dt}; the step is too large for the stiffness of the field")]
    NonFinite { step: u64, dt: f64 },

    #[error("step size {dt} exceeds the stiffness guard 0.1/L = {limit} (sampled Lipschitz bound L = {lipschitz})")]
    StepTooLarge { dt: f64, limit: f64, lipschitz: f64 },

    #[error("energy scale mu = {mu} outside the admissible range ({lower}, {upper}){hint}")]
    ScaleOutOfRange {
        mu: f64,
        lower: f64,
        upper: f64,
        hint: &'static str,
    },

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("profiles are sampled on different phase grids ({0} vs {1} points)")]
    GridMismatch(usize, usize),

    #[error("resonance interval is empty")]
    EmptyInterval,

    #[error("only {usable} usable ladder points, at least {required} are needed")]
    InsufficientPoints { usable: usize, required: usize },

    #[error("time grid too coarse: step {step} > {limit}")]
    GridTooCoarse { step: f64, limit: f64 },

    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("malformed profile data: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
