use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite coordinate in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("solver failed: {message} (best violation {violation:.3e} at {best:?})")]
    SolverFailure {
        message: String,
        best: Vec<f64>,
        violation: f64,
    },

    #[error("minimax program infeasible: game value {value:.3e} exceeds tolerance ({diagnostics})")]
    MinimaxInfeasible { value: f64, diagnostics: String },

    #[error("full (c, a) log not retained")]
    LogNotRetained,

    #[error("history is empty")]
    EmptyHistory,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("verification mismatch: {0}")]
    Verification(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::ContractViolation(msg.into())
    }

    pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
        if expected == found {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, found })
        }
    }

    /// Process exit code used by the command line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::SolverFailure { .. } | Error::MinimaxInfeasible { .. } | Error::Verification(_) => 3,
            Error::Io(_) => 4,
            _ => 2,
        }
    }
}
