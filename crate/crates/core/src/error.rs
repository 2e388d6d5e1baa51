use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("truncation inadequate: {detail}")]
    Truncation { detail: String },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("tolerance failure in {check} at t = {time}: value {value:e} exceeds bound {bound:e}")]
    ToleranceFailure {
        check: &'static str,
        time: f64,
        value: f64,
        bound: f64,
    },

    #[error("precondition violated in {operation}: {detail}")]
    PreconditionViolation {
        operation: &'static str,
        detail: String,
    },

    #[error("measurement branch has zero probability (atom {atom}, outcome {outcome})")]
    ZeroProbability { atom: usize, outcome: String },

    #[error("matrix is not unitary (deviation {deviation:e})")]
    NonUnitary { deviation: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Module that raised the error, for diagnostics.
    pub fn module(&self) -> &'static str {
        match self {
            Error::Truncation { .. } | Error::DimensionMismatch { .. } | Error::InvalidState(_) => {
                "hilbert"
            }
            Error::ToleranceFailure { .. } => "dynamics",
            Error::PreconditionViolation { .. }
            | Error::ZeroProbability { .. }
            | Error::NonUnitary { .. } => "protocol",
            Error::Domain(_) => "transfer/validity",
            Error::InvalidArgument(_) => "config",
        }
    }

    /// True for failures of numerical adequacy (truncation or integrator guards).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Truncation { .. } | Error::ToleranceFailure { .. }
        )
    }

    /// True for invalid protocol scripts.
    pub fn is_protocol(&self) -> bool {
        matches!(
            self,
            Error::PreconditionViolation { .. } | Error::ZeroProbability { .. } | Error::NonUnitary { .. }
        )
    }
}
