use thiserror::Error;

/// Errors raised by the numerical modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid curve specification: {0}")]
    InvalidCurve(String),

    #[error("curve derivative vanishes near parameter {theta:.6} (|dγ/dθ| = {speed:.3e})")]
    NonRegularCurve { theta: f64, speed: f64 },

    #[error("curve self-intersects near parameters {theta_a:.6} and {theta_b:.6}")]
    SelfIntersection { theta_a: f64, theta_b: f64 },

    #[error("curve requires smoothness order {required}, have {available}")]
    InsufficientSmoothness { required: u32, available: u32 },

    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("configuration leaves the ordered domain: {0}")]
    DomainViolation(String),

    #[error("invalid temperature: {0}")]
    InvalidTemperature(String),

    #[error("step failed at t = {time:.6e}: smallest gap {gap:.3e} after {halvings} halvings; reduce dt")]
    StepFailure { time: f64, gap: f64, halvings: u32 },

    #[error("test function support reaches the boundary: {0}")]
    SupportViolation(String),

    #[error("gradient flow did not converge: |∇V| = {grad_norm:.3e} after {iterations} iterations")]
    NonConvergence { grad_norm: f64, iterations: usize },

    #[error("gradient flow step too large: energy increased even at dt = {dt:.3e}")]
    StepTooLarge { dt: f64 },

    #[error("degenerate path: {0}")]
    DegeneratePath(String),

    #[error("path point {index} lies {distance:.3e} off the curve")]
    OffCurvePath { index: usize, distance: f64 },

    #[error("point lies {distance:.3e} off the curve")]
    OffCurvePoint { distance: f64 },

    #[error("expression parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { field: field.into(), message: message.into() }
    }

    /// Process exit status: 2 for configuration problems, 3 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 2,
            _ => 3,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
