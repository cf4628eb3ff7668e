//! Read, write and update transitions over an executing component and its
//! context. Client steps pass `(client, library)`; library steps swap them.

use crate::action::Action;
use crate::state::{merge_views, ComponentState, OpRef, TimestampedOp};
use crate::timestamp::Timestamp;
use crate::types::{ThreadId, Value};

/// One memory-level successor.
#[derive(Clone, Debug)]
pub struct Transition {
    /// New state of the executing component.
    pub exec: ComponentState,
    /// New state of the context component.
    pub ctx: ComponentState,
    /// Timestamp of the op read from, or written after.
    pub pred: Timestamp,
}

fn observable(g: &ComponentState, t: ThreadId, a: &Action) -> Vec<TimestampedOp> {
    g.observable_ops(t, a.var()).unwrap_or_default()
}

/// `γ, β —rd^[A](x,n)→_t γ', β'`: one successor per observable write of `n`.
pub fn mem_read(g: &ComponentState, b: &ComponentState, t: ThreadId, a: &Action) -> Vec<Transition> {
    let Action::Read { var, value, acquire } = a else {
        return vec![];
    };
    observable(g, t, a)
        .into_iter()
        .filter(|w| w.action.wrval() == Some(*value))
        .map(|w| {
            let mut exec = g.clone();
            let mut ctx = b.clone();
            let tv = g.thread_view(t);
            if *acquire && w.action.is_releasing_write() {
                let mv = &g.mview[&w.op_ref()];
                exec.tview.insert(t, merge_views(&tv, mv));
                ctx.tview.insert(t, merge_views(&b.thread_view(t), mv));
            } else {
                exec.tview.insert(t, tv.with(var.clone(), w.ts));
            }
            Transition { exec, ctx, pred: w.ts }
        })
        .collect()
}

/// `γ, β —wr^[R](x,n)→_t γ', β`: one successor per observable, uncovered
/// predecessor, inserting the write immediately after it.
pub fn mem_write(g: &ComponentState, b: &ComponentState, t: ThreadId, a: &Action) -> Vec<Transition> {
    let Action::Write { var, .. } = a else {
        return vec![];
    };
    observable(g, t, a)
        .into_iter()
        .filter(|w| !g.cvd.contains(&w.op_ref()))
        .map(|w| {
            let q2 = g.insert_fresh_timestamp(w.ts);
            let mut exec = g.clone();
            exec.insert_op(a.clone(), q2);
            let tv = g.thread_view(t).with(var.clone(), q2);
            exec.mview
                .insert(OpRef::new(var.clone(), q2), tv.union(&b.thread_view(t)));
            exec.tview.insert(t, tv);
            Transition {
                exec,
                ctx: b.clone(),
                pred: w.ts,
            }
        })
        .collect()
}

/// `γ, β —upd^RA(x,m,n)→_t γ', β'`: reads an uncovered observable write of
/// `m`, covers it and inserts the update immediately after.
pub fn mem_update(g: &ComponentState, b: &ComponentState, t: ThreadId, a: &Action) -> Vec<Transition> {
    let Action::Update { var, read, .. } = a else {
        return vec![];
    };
    observable(g, t, a)
        .into_iter()
        .filter(|w| w.action.wrval() == Some(*read) && !g.cvd.contains(&w.op_ref()))
        .map(|w| {
            let q2 = g.insert_fresh_timestamp(w.ts);
            let mut exec = g.clone();
            exec.insert_op(a.clone(), q2);
            exec.cvd.insert(w.op_ref());
            let mut tv = g.thread_view(t).with(var.clone(), q2);
            let mut ctv = b.thread_view(t);
            if w.action.is_releasing_write() {
                let mv = &g.mview[&w.op_ref()];
                tv = merge_views(&tv, mv);
                ctv = merge_views(&ctv, mv);
            }
            exec.mview.insert(OpRef::new(var.clone(), q2), tv.union(&ctv));
            exec.tview.insert(t, tv);
            let mut ctx = b.clone();
            ctx.tview.insert(t, ctv);
            Transition { exec, ctx, pred: w.ts }
        })
        .collect()
}

/// Dispatch on the action kind; object actions have no memory transition.
pub fn mem_step(g: &ComponentState, b: &ComponentState, t: ThreadId, a: &Action) -> Vec<Transition> {
    match a {
        Action::Read { .. } => mem_read(g, b, t, a),
        Action::Write { .. } => mem_write(g, b, t, a),
        Action::Update { .. } => mem_update(g, b, t, a),
        _ => vec![],
    }
}

/// Values written to the variable `a` reads from, in either component; the
/// candidate set for read values.
pub fn written_values(g: &ComponentState, x: &crate::types::Var) -> Vec<Value> {
    let mut vals: Vec<Value> = g.ops_on(x).filter_map(|(_, a)| a.wrval()).collect();
    vals.sort();
    vals.dedup();
    vals
}
