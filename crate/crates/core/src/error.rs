use crate::graph::NodeId;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PcaError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("structural error: {0}")]
    Structure(String),
    #[error("node {0} is not reachable from the root")]
    Unreachable(NodeId),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error("parse error (line {line}): {msg}")]
    Parse { line: usize, msg: String },
}

impl PcaError {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        PcaError::Parse { line, msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, PcaError>;
