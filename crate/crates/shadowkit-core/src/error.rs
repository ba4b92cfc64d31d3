use alloc::string::String;

use crate::seqcore::Window;

/// Failure modes shared by all engines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("window mismatch: expected [{}, {}], found [{}, {}]", expected.lo, expected.hi, found.lo, found.hi)]
    WindowMismatch { expected: Window, found: Window },
    #[error("operator not invertible: {0}")]
    NotInvertible(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("truncation guard: mass {mass:e} within {margin} indices of the window boundary at step {step}")]
    Truncation { step: i64, mass: f64, margin: usize },
    #[error("derivative range violated: {0}")]
    DerivativeRange(String),
    #[error("certificate failure: {0}")]
    Certificate(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("contraction failure: {0}")]
    Contraction(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("size cap exceeded: {unknowns} unknowns > {cap}")]
    SizeCap { unknowns: usize, cap: usize },
}

impl Error {
    /// Stable machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::WindowMismatch { .. } => "window_mismatch",
            Error::NotInvertible(_) => "not_invertible",
            Error::InvalidInput(_) => "invalid_input",
            Error::Truncation { .. } => "truncation",
            Error::DerivativeRange(_) => "derivative_range",
            Error::Certificate(_) => "certificate",
            Error::Precondition(_) => "precondition",
            Error::Contraction(_) => "contraction",
            Error::NoConvergence(_) => "no_convergence",
            Error::SizeCap { .. } => "size_cap",
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
