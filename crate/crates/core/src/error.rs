use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no phase condition satisfied at gamma={gamma}, eta={eta}")]
    InconsistentPhase { gamma: f64, eta: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:.3e}): {context}")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        context: String,
    },

    #[error("step too large: {0}")]
    StepTooLarge(String),

    #[error("stability violation: {0}")]
    StabilityViolation(String),

    #[error("cubic roots coalesce (discriminant {0:.3e})")]
    CubicDegeneracy(f64),

    #[error("no root bracketed: {0}")]
    RootBracketFailure(String),

    #[error("degenerate denominator {0:.3e}")]
    DegenerateDenominator(f64),

    #[error("no finite time: {0}")]
    NoFiniteTime(String),

    #[error("io: {0}")]
    Io(String),

    #[error("format: {0}")]
    Format(String),
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

pub type Result<T> = std::result::Result<T, Error>;
