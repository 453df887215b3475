use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter lies outside the domain of the operation.
    Domain(String),
    /// A documented precondition of the operation does not hold.
    Precondition(String),
    /// The simulated plant left the configured state bound.
    Divergence { t: f64, q: f64, v: f64 },
    /// An iterative solver hit its iteration cap.
    NonConvergence { iterations: usize, residual: f64 },
    /// A dense linear system could not be factorised.
    Singular,
    /// Continuation step fell below the configured minimum.
    StepUnderflow { step: f64 },
    /// An arclength correction swept a full ellipse without bracketing a root.
    NoIntersection { swept: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Precondition(msg) => write!(f, "precondition violated: {msg}"),
            Error::Divergence { t, q, v } => {
                write!(f, "plant diverged at t={t} (q={q}, v={v})")
            }
            Error::NonConvergence {
                iterations,
                residual,
            } => write!(
                f,
                "no convergence after {iterations} iterations (residual {residual:e})"
            ),
            Error::Singular => write!(f, "singular linear system"),
            Error::StepUnderflow { step } => write!(f, "continuation step underflow ({step:e})"),
            Error::NoIntersection { swept } => write!(
                f,
                "ellipse swept by {swept} rad without crossing the force level"
            ),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn precondition(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}
