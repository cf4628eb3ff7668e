//! Executable release-acquire weak-memory semantics for client/library
//! programs over abstract objects.

pub mod action;
pub mod assertion;
pub mod error;
pub mod explore;
pub mod fifo;
pub mod litmus;
pub mod lock_rules;
pub mod memory;
pub mod objects;
pub mod outline;
pub mod program;
pub mod refinement;
pub mod state;
pub mod timestamp;
pub mod types;

pub use action::{Action, SyncMode};
pub use error::ModelError;
pub use objects::ObjectSpec;
pub use program::{Cmd, Expr, LocalState};
pub use state::{merge_views, ComponentState, ObjectKind, OpRef, TimestampedOp, View};
pub use timestamp::Timestamp;
pub use types::{Component, Reg, ThreadId, Value, Var};
