//! Abstract lock and queue objects.
//!
//! In every rule `lib` is the object's (library) state and `client` the
//! context. Lock versions count the lock's ops: acquires are odd, releases
//! even.

use crate::action::Action;
use crate::program::Method;
use crate::state::{merge_views, ComponentState, ObjectKind, OpRef};
use crate::timestamp::Timestamp;
use crate::types::{ThreadId, Value, Var};

/// An abstract object and its synchronising actions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ObjectSpec {
    pub name: Var,
    pub kind: ObjectKind,
}

impl ObjectSpec {
    pub fn lock(name: &str) -> Self {
        ObjectSpec {
            name: Var::new(name),
            kind: ObjectKind::Lock,
        }
    }

    pub fn queue(name: &str) -> Self {
        ObjectSpec {
            name: Var::new(name),
            kind: ObjectKind::Queue,
        }
    }

    pub fn methods(&self) -> &'static [Method] {
        match self.kind {
            ObjectKind::Lock => &[Method::Acquire, Method::Release],
            ObjectKind::Queue => &[Method::Enq, Method::Deq],
        }
    }

    pub fn init_action(&self) -> Action {
        match self.kind {
            ObjectKind::Lock => Action::LockInit {
                lock: self.name.clone(),
            },
            ObjectKind::Queue => Action::QueueInit {
                queue: self.name.clone(),
            },
        }
    }
}

/// Membership in `Sync`: lock acquire/release, enqueue and non-empty dequeue.
pub fn is_sync(a: &Action) -> bool {
    match a {
        Action::LockAcquire { .. } | Action::LockRelease { .. } | Action::Enqueue { .. } => true,
        Action::Dequeue { value, .. } => *value != Value::Empty,
        _ => false,
    }
}

/// One successor of an abstract method call.
#[derive(Clone, Debug)]
pub struct ObjectOutcome {
    pub lib: ComponentState,
    pub client: ComponentState,
    pub action: Action,
    pub rval: Value,
    /// Lock version of the new op.
    pub version: Option<u32>,
    /// Timestamp of the op the new one is inserted after.
    pub after: Timestamp,
}

fn lock_op_count(lib: &ComponentState, l: &Var) -> u32 {
    lib.ops_on(l).count() as u32
}

/// Acquire: enabled only when the latest lock op is the init or a release and
/// is uncovered; synchronises with that op's modification view.
pub fn lock_acquire(lib: &ComponentState, client: &ComponentState, t: ThreadId, l: &Var) -> Vec<ObjectOutcome> {
    let Some(w) = lib.max_op(l) else {
        return vec![];
    };
    let n = lock_op_count(lib, l);
    let available = match &w.action {
        Action::LockInit { .. } => n == 1,
        Action::LockRelease { version, .. } => *version + 1 == n,
        _ => false,
    };
    if !available || lib.cvd.contains(&w.op_ref()) {
        return vec![];
    }
    let b = Action::LockAcquire {
        lock: l.clone(),
        version: n,
        owner: t,
    };
    let q2 = lib.insert_fresh_timestamp(w.ts);
    let mv = &lib.mview[&w.op_ref()];
    let tv = merge_views(&lib.thread_view(t).with(l.clone(), q2), mv);
    let ctv = merge_views(&client.thread_view(t), mv);
    let mut lib2 = lib.clone();
    lib2.insert_op(b.clone(), q2);
    lib2.cvd.insert(w.op_ref());
    lib2.mview.insert(OpRef::new(l.clone(), q2), tv.union(&ctv));
    lib2.tview.insert(t, tv);
    let mut client2 = client.clone();
    client2.tview.insert(t, ctv);
    vec![ObjectOutcome {
        lib: lib2,
        client: client2,
        action: b,
        rval: Value::Bool(true),
        version: Some(n),
        after: w.ts,
    }]
}

/// Release: enabled only for the holder of the latest acquire. Records the
/// releaser's views but does not synchronise.
pub fn lock_release(lib: &ComponentState, client: &ComponentState, t: ThreadId, l: &Var) -> Vec<ObjectOutcome> {
    let Some(w) = lib.max_op(l) else {
        return vec![];
    };
    let n = lock_op_count(lib, l);
    match &w.action {
        Action::LockAcquire { version, owner, .. } if *owner == t && version + 1 == n => {}
        _ => return vec![],
    }
    let a = Action::LockRelease {
        lock: l.clone(),
        version: n,
    };
    let q2 = lib.insert_fresh_timestamp(w.ts);
    let tv = lib.thread_view(t).with(l.clone(), q2);
    let mut lib2 = lib.clone();
    lib2.insert_op(a.clone(), q2);
    lib2.mview
        .insert(OpRef::new(l.clone(), q2), tv.union(&client.thread_view(t)));
    lib2.tview.insert(t, tv);
    vec![ObjectOutcome {
        lib: lib2,
        client: client.clone(),
        action: a,
        rval: Value::Bot,
        version: Some(n),
        after: w.ts,
    }]
}

/// Candidate insertion points: after each op on `q` at or beyond `floor`.
fn gaps(lib: &ComponentState, q: &Var, floor: Timestamp) -> Vec<(Timestamp, Timestamp)> {
    lib.ops_on(q)
        .filter(|(ts, _)| **ts >= floor)
        .map(|(ts, _)| (*ts, lib.insert_fresh_timestamp(*ts)))
        .collect()
}

fn is_matched_enq(lib: &ComponentState, ts: Timestamp) -> bool {
    lib.matched.iter().any(|(e, _)| *e == ts)
}

/// Enqueue: one successor per admissible gap after the thread's view; no
/// matched enqueue or empty dequeue may follow the new op.
pub fn queue_enq(lib: &ComponentState, client: &ComponentState, t: ThreadId, q: &Var, u: Value) -> Vec<ObjectOutcome> {
    let Some(front) = lib.view_of(t, q) else {
        return vec![];
    };
    let a = Action::Enqueue {
        queue: q.clone(),
        value: u,
    };
    let mut out = Vec::new();
    for (after, ts2) in gaps(lib, q, front) {
        let blocked = lib.ops_on(q).any(|(tt, ww)| {
            *tt > ts2 && ((ww.is_enqueue() && is_matched_enq(lib, *tt)) || ww.is_empty_dequeue())
        });
        if blocked {
            continue;
        }
        let tv = lib.thread_view(t).with(q.clone(), ts2);
        let mut lib2 = lib.clone();
        lib2.insert_op(a.clone(), ts2);
        lib2.mview
            .insert(OpRef::new(q.clone(), ts2), tv.union(&client.thread_view(t)));
        lib2.tview.insert(t, tv);
        out.push(ObjectOutcome {
            lib: lib2,
            client: client.clone(),
            action: a.clone(),
            rval: Value::Bot,
            version: None,
            after,
        });
    }
    out
}

/// Dequeue: the non-empty branch consumes the earliest unmatched enqueue
/// and synchronises with it; the empty branch requires everything before the
/// new op to be consumed already.
pub fn queue_deq(lib: &ComponentState, client: &ComponentState, t: ThreadId, q: &Var) -> Vec<ObjectOutcome> {
    let Some(front) = lib.view_of(t, q) else {
        return vec![];
    };
    let mut out = Vec::new();
    let last_deq = lib.matched.iter().map(|(_, d)| *d).max();

    // Deq-NE
    let oldest = lib
        .ops_on(q)
        .find(|(ts, a)| a.is_enqueue() && !is_matched_enq(lib, **ts))
        .map(|(ts, a)| (*ts, a.clone()));
    if let Some((ts, w)) = oldest {
        let Action::Enqueue { value, .. } = w else {
            unreachable!()
        };
        let floor = [Some(front), Some(ts), last_deq].into_iter().flatten().max().unwrap();
        let a = Action::Dequeue {
            queue: q.clone(),
            value,
        };
        let mv = &lib.mview[&OpRef::new(q.clone(), ts)];
        for (after, ts2) in gaps(lib, q, floor) {
            let tv = merge_views(&lib.thread_view(t).with(q.clone(), ts2), mv);
            let ctv = merge_views(&client.thread_view(t), mv);
            let mut lib2 = lib.clone();
            lib2.insert_op(a.clone(), ts2);
            lib2.matched.insert((ts, ts2));
            lib2.mview.insert(OpRef::new(q.clone(), ts2), tv.union(&ctv));
            lib2.tview.insert(t, tv);
            let mut client2 = client.clone();
            client2.tview.insert(t, ctv);
            out.push(ObjectOutcome {
                lib: lib2,
                client: client2,
                action: a.clone(),
                rval: value,
                version: None,
                after,
            });
        }
    }

    // Deq-Emp
    let a = Action::Dequeue {
        queue: q.clone(),
        value: Value::Empty,
    };
    for (after, ts2) in gaps(lib, q, front) {
        let consumed = lib.ops_on(q).filter(|(tt, _)| **tt < ts2).all(|(tt, ww)| {
            matches!(ww, Action::QueueInit { .. })
                || ww.is_empty_dequeue()
                || lib.matched.iter().any(|(e, d)| e == tt || d == tt)
        });
        let inside_pair = lib.matched.iter().any(|(e, d)| *e < ts2 && ts2 < *d);
        if !consumed || inside_pair {
            continue;
        }
        let tv = lib.thread_view(t).with(q.clone(), ts2);
        let mut lib2 = lib.clone();
        lib2.insert_op(a.clone(), ts2);
        lib2.mview
            .insert(OpRef::new(q.clone(), ts2), tv.union(&client.thread_view(t)));
        lib2.tview.insert(t, tv);
        out.push(ObjectOutcome {
            lib: lib2,
            client: client.clone(),
            action: a.clone(),
            rval: Value::Empty,
            version: None,
            after,
        });
    }
    out
}

/// Dispatch a method call on an abstract object.
pub fn object_step(
    spec: &ObjectSpec,
    lib: &ComponentState,
    client: &ComponentState,
    t: ThreadId,
    method: Method,
    arg: Option<Value>,
) -> Vec<ObjectOutcome> {
    match (spec.kind, method) {
        (ObjectKind::Lock, Method::Acquire) => lock_acquire(lib, client, t, &spec.name),
        (ObjectKind::Lock, Method::Release) => lock_release(lib, client, t, &spec.name),
        (ObjectKind::Queue, Method::Enq) => queue_enq(lib, client, t, &spec.name, arg.unwrap_or(Value::Bot)),
        (ObjectKind::Queue, Method::Deq) => queue_deq(lib, client, t, &spec.name),
        _ => vec![],
    }
}
