use thiserror::Error;

use crate::optim::OptTrace;

pub type Result<T, E = KlrError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum KlrError {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at data row {row}, column '{column}': {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("degenerate sketch: every eigenvalue of W fell under the pseudoinverse threshold")]
    DegenerateSketch,

    #[error("size guard exceeded: {what} is {actual}, limit {limit}")]
    Size {
        what: &'static str,
        actual: usize,
        limit: usize,
    },

    #[error("optimizer diverged at iteration {iter}: non-finite loss")]
    Diverged { iter: usize, trace: Box<OptTrace> },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl KlrError {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            KlrError::Schema(_)
            | KlrError::Parse { .. }
            | KlrError::EmptyInput(_)
            | KlrError::Argument(_)
            | KlrError::Io(_)
            | KlrError::Json(_)
            | KlrError::Csv(_) => 2,
            KlrError::Numeric(_) | KlrError::DegenerateSketch | KlrError::Diverged { .. } => 3,
            KlrError::Size { .. } => 4,
        }
    }

    /// Short machine-readable kind tag.
    pub fn kind(&self) -> &'static str {
        match self {
            KlrError::Schema(_) => "schema",
            KlrError::Parse { .. } => "parse",
            KlrError::EmptyInput(_) => "empty_input",
            KlrError::Argument(_) => "argument",
            KlrError::Numeric(_) => "numeric",
            KlrError::DegenerateSketch => "degenerate_sketch",
            KlrError::Size { .. } => "size",
            KlrError::Diverged { .. } => "diverged",
            KlrError::Io(_) => "io",
            KlrError::Json(_) => "json",
            KlrError::Csv(_) => "csv",
        }
    }
}

pub(crate) fn arg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(KlrError::Argument(msg.into()))
}
