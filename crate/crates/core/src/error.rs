use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes shared by every module of the kit.
///
/// The variants are grouped so that callers (the CLI in particular) can map
/// them onto a small set of exit codes: input, domain, convergence and
/// theorem-precondition failures.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("rejected input: {0}")]
    RejectedInput(String),

    #[error("dimension mismatch: {left}x{left} vs {right}x{right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("matrix is not Hermitian: relative defect {defect:e} exceeds hermiticity_tol {tol:e}")]
    NotHermitian { defect: f64, tol: f64 },

    #[error("trace is {trace} but must be 1 within trace_tol {tol:e}")]
    BadTrace { trace: f64, tol: f64 },

    #[error("singular state: smallest eigenvalue {min_eigenvalue:e} is not above positivity_floor {floor:e}")]
    SingularState { min_eigenvalue: f64, floor: f64 },

    #[error("not a valid measurement: {0}")]
    InvalidPovm(String),

    #[error("domain error at coordinate {coordinate}: {message}")]
    Domain { coordinate: usize, message: String },

    #[error("lift did not converge: end-point defect {defect:e} > tolerance {tol:e} after {steps} steps; try more steps")]
    Convergence { defect: f64, tol: f64, steps: usize },

    #[error("SLDs {i} and {j} do not commute (comm_norm {norm:e} > tol {tol:e}); the model is not locally quasi-classical here")]
    NotQuasiClassical {
        i: usize,
        j: usize,
        norm: f64,
        tol: f64,
    },

    #[error("unknown model '{name}'; valid names: {valid}")]
    UnknownModel { name: String, valid: String },

    #[error("model file: {0}")]
    ModelFile(String),
}

impl Error {
    pub(crate) fn rejected(msg: impl Into<String>) -> Self {
        Error::RejectedInput(msg.into())
    }

    pub(crate) fn domain(coordinate: usize, msg: impl Into<String>) -> Self {
        Error::Domain {
            coordinate,
            message: msg.into(),
        }
    }

    /// Coarse category used for process exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Domain { .. } => ErrorKind::Domain,
            Error::Convergence { .. } => ErrorKind::Convergence,
            Error::NotQuasiClassical { .. } => ErrorKind::Precondition,
            _ => ErrorKind::Input,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Domain,
    Convergence,
    Precondition,
}
