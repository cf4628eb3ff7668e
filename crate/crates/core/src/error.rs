use thiserror::Error;

use crate::types::{Reg, Var};

/// Errors raised by the state, program and memory layers when they are
/// called outside their preconditions.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(Var),
    #[error("no operation on `{0}`")]
    NoOps(Var),
    #[error("variable `{0}` initialised more than once")]
    DuplicateInit(Var),
    #[error("unbound register `{0}`")]
    UnboundLocal(Reg),
    #[error("program has no hole to fill")]
    NoHole,
    #[error("type error: {0}")]
    Type(String),
    #[error("thread {0} takes more than {1} consecutive silent steps")]
    Divergence(crate::types::ThreadId, usize),
    #[error("no object named `{0}`")]
    UnknownObject(Var),
}
