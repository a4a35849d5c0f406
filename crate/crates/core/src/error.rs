use thiserror::Error;

/// Errors produced by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("size limit exceeded: {0}")]
    Size(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("cut loop hit the round cap of {rounds} rounds")]
    CutRoundLimit { rounds: usize },
    #[error("unbounded LP")]
    Unbounded,
    #[error("internal invariant breached: {0}")]
    Internal(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable tag, used by the CLI's structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::Parse(_) => "parse",
            Error::Parameter(_) => "parameter",
            Error::Size(_) => "size",
            Error::Infeasible(_) => "infeasible",
            Error::Precondition(_) => "precondition",
            Error::Schema(_) => "schema",
            Error::CutRoundLimit { .. } => "cut_round_limit",
            Error::Unbounded => "unbounded",
            Error::Internal(_) => "internal",
            Error::Io(_) => "io",
        }
    }
}
