use thiserror::Error;

/// Errors produced anywhere in the certification pipeline.
#[derive(Debug, Error)]
pub enum CertError {
    /// An input violated a type invariant or an operation precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// The union-bound certificate for the system-level decomposition failed:
    /// the module bounds sum to more than one half.
    #[error("assumption violated: module failure bounds sum to {sum} > 0.5")]
    AssumptionViolated { sum: f64 },

    /// A search or experiment would exceed its configured hard cap.
    #[error("capacity exceeded: {message}")]
    Capacity {
        message: String,
        /// Bound value reached at the cap, when the search has one.
        achieved_bound: Option<f64>,
    },

    /// Malformed log or configuration input.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = CertError> = std::result::Result<T, E>;

impl CertError {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        CertError::Validation(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        CertError::Parse {
            line,
            message: msg.into(),
        }
    }

    /// Process exit code for this error: 2 for data problems, 3 for an
    /// assumption violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            CertError::AssumptionViolated { .. } => 3,
            _ => 2,
        }
    }
}
