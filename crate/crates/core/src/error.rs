use thiserror::Error;

use crate::sweep::SolveReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("stability condition violated: integral of R*D = {value} (must be < 1)")]
    StabilityViolation { value: f64 },

    #[error("negative control value {value} at {location}")]
    NegativeControl { value: f64, location: String },

    #[error("inadmissible control value {value} at {location} (admissible range [0, {max}])")]
    InadmissibleControl {
        value: f64,
        max: f64,
        location: String,
    },

    #[error("CFL condition violated: dt = {dt} exceeds da = {da}")]
    CflViolation { dt: f64, da: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("Volterra step too coarse: 1 - dt/2 * K(0) = {pivot}")]
    SingularStep { pivot: f64 },

    #[error("state too close to zero for gamma < 1: G = {value} at t = {t}, a = {a}")]
    SingularState { value: f64, t: f64, a: f64 },

    #[error("negative state value {value} at t = {t}, a = {a}")]
    NegativeState { value: f64, t: f64, a: f64 },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("sweep did not converge: final control change {}", .0.final_control_change)]
    NoConvergence(Box<SolveReport>),

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short class name reported on stderr by the CLI.
    pub fn class_name(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::StabilityViolation { .. } => "StabilityViolation",
            Error::NegativeControl { .. } => "NegativeControl",
            Error::InadmissibleControl { .. } => "InadmissibleControl",
            Error::CflViolation { .. } => "CflViolation",
            Error::GridMismatch(_) => "GridMismatch",
            Error::SingularStep { .. } => "SingularStep",
            Error::SingularState { .. } => "SingularState",
            Error::NegativeState { .. } => "NegativeState",
            Error::NonFinite(_) => "NonFinite",
            Error::NoConvergence(_) => "NoConvergence",
            Error::Config(_) => "ConfigError",
            Error::Io(_) => "IoError",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) => 2,
            Error::StabilityViolation { .. } => 3,
            Error::NoConvergence(_) => 4,
            _ => 1,
        }
    }
}
