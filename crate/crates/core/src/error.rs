use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("time step must be finite and positive, got {0}")]
    InvalidTimeStep(f64),

    #[error("noise plan must provide at least one stream")]
    NoStreams,

    #[error("kernel is singular at t = {0}; evaluate at t > 0")]
    NonPositiveTime(f64),

    #[error("ill-conditioned Prony fit (condition estimate {condition:.3e}): {reason}")]
    IllConditioned { condition: f64, reason: String },

    #[error("critically damped system: beta = {beta}, omega = {omega}")]
    CriticallyDamped { beta: f64, omega: f64 },

    #[error("covariance formula left an imaginary part {im:.3e} against real part {re:.3e}")]
    ComplexResidue { re: f64, im: f64 },

    #[error("perturbation leaves the admissible set: {parameter} = {value}")]
    Inadmissible { parameter: String, value: f64 },

    #[error("non-finite state in sample {sample} at step {step}")]
    NonFinite { sample: usize, step: usize },

    #[error("degenerate statistic: {0}")]
    Degenerate(String),

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}
