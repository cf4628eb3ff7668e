use std::fmt;

use crate::types::{ThreadId, Value, Var};

/// Synchronisation annotation carried by an action.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum SyncMode {
    Relaxed,
    Release,
    Acquire,
    ReleaseAcquire,
    ObjectSync,
}

/// Actions of the memory and object semantics.
///
/// Writes, updates and object operations are the ones recorded in a
/// component's `ops`; reads only ever appear as transition labels.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    Write { var: Var, value: Value, release: bool },
    Read { var: Var, value: Value, acquire: bool },
    /// Read-modify-write; always release-acquire.
    Update { var: Var, read: Value, write: Value },
    LockInit { lock: Var },
    LockAcquire { lock: Var, version: u32, owner: ThreadId },
    LockRelease { lock: Var, version: u32 },
    QueueInit { queue: Var },
    Enqueue { queue: Var, value: Value },
    /// `value` is [`Value::Empty`] for an empty dequeue.
    Dequeue { queue: Var, value: Value },
}

impl Action {
    /// The variable or object the action operates on.
    pub fn var(&self) -> &Var {
        match self {
            Action::Write { var, .. } | Action::Read { var, .. } | Action::Update { var, .. } => {
                var
            }
            Action::LockInit { lock }
            | Action::LockAcquire { lock, .. }
            | Action::LockRelease { lock, .. } => lock,
            Action::QueueInit { queue }
            | Action::Enqueue { queue, .. }
            | Action::Dequeue { queue, .. } => queue,
        }
    }

    pub fn sync(&self) -> SyncMode {
        match self {
            Action::Write { release: true, .. } => SyncMode::Release,
            Action::Read { acquire: true, .. } => SyncMode::Acquire,
            Action::Write { .. } | Action::Read { .. } => SyncMode::Relaxed,
            Action::Update { .. } => SyncMode::ReleaseAcquire,
            _ => SyncMode::ObjectSync,
        }
    }

    /// Is this a write to a plain variable (including updates)?
    pub fn is_write(&self) -> bool {
        matches!(self, Action::Write { .. } | Action::Update { .. })
    }

    /// Member of W_R: a releasing write or an update.
    pub fn is_releasing_write(&self) -> bool {
        matches!(
            self,
            Action::Write { release: true, .. } | Action::Update { .. }
        )
    }

    pub fn is_acquiring_read(&self) -> bool {
        matches!(self, Action::Read { acquire: true, .. })
    }

    /// Value written, for writes and updates.
    pub fn wrval(&self) -> Option<Value> {
        match self {
            Action::Write { value, .. } => Some(*value),
            Action::Update { write, .. } => Some(*write),
            _ => None,
        }
    }

    pub fn is_enqueue(&self) -> bool {
        matches!(self, Action::Enqueue { .. })
    }

    pub fn is_empty_dequeue(&self) -> bool {
        matches!(
            self,
            Action::Dequeue {
                value: Value::Empty,
                ..
            }
        )
    }

    pub fn is_dequeue(&self) -> bool {
        matches!(self, Action::Dequeue { .. })
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Write {
                var,
                value,
                release,
            } => write!(f, "wr{}({var}, {value})", if *release { "^R" } else { "" }),
            Action::Read {
                var,
                value,
                acquire,
            } => write!(f, "rd{}({var}, {value})", if *acquire { "^A" } else { "" }),
            Action::Update { var, read, write } => write!(f, "upd^RA({var}, {read}, {write})"),
            Action::LockInit { lock } => write!(f, "{lock}.init_0"),
            Action::LockAcquire {
                lock,
                version,
                owner,
            } => write!(f, "{lock}.acquire_{version}({owner})"),
            Action::LockRelease { lock, version } => write!(f, "{lock}.release_{version}"),
            Action::QueueInit { queue } => write!(f, "{queue}.init"),
            Action::Enqueue { queue, value } => write!(f, "{queue}.enq({value})"),
            Action::Dequeue { queue, value } => write!(f, "{queue}.deq({value})"),
        }
    }
}

impl fmt::Debug for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sync_modes() {
        let x = Var::new("x");
        let upd = Action::Update {
            var: x.clone(),
            read: Value::Int(0),
            write: Value::Int(1),
        };
        assert_eq!(upd.sync(), SyncMode::ReleaseAcquire);
        assert!(upd.is_releasing_write());
        let wr = Action::Write {
            var: x.clone(),
            value: Value::Int(1),
            release: false,
        };
        assert_eq!(wr.sync(), SyncMode::Relaxed);
        assert!(!wr.is_releasing_write());
        let acq = Action::LockAcquire {
            lock: Var::new("l"),
            version: 1,
            owner: ThreadId(2),
        };
        assert_eq!(acq.sync(), SyncMode::ObjectSync);
        assert_eq!(acq.to_string(), "l.acquire_1(2)");
    }
}
