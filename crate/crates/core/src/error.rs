use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{0}; refine grid")]
    RefineGrid(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("epsilon schedule exhausted after {levels} levels in the {regime} regime (last gap {gap:.3e})")]
    ScheduleExhausted {
        regime: String,
        levels: usize,
        gap: f64,
    },

    #[error("no admissible supersolution at lambda = {lambda}: {reason}")]
    NoSupersolution { lambda: f64, reason: String },

    #[error("bracket violated at iterate {iterate}: {detail}")]
    BracketViolation { iterate: usize, detail: String },

    #[error("continuation failed: {0}")]
    Continuation(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, got })
        }
    }
}
