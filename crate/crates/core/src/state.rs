//! Component states: timestamped operations, thread and modification views,
//! the covered set, and queue matching.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::action::Action;
use crate::error::ModelError;
use crate::program::LocalState;
use crate::timestamp::Timestamp;
use crate::types::{ThreadId, Value, Var};

/// An operation identified by its variable and timestamp. Within a component
/// this pair is unique: distinct ops on one variable never share a timestamp.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct OpRef {
    pub var: Var,
    pub ts: Timestamp,
}

impl OpRef {
    pub fn new(var: Var, ts: Timestamp) -> Self {
        OpRef { var, ts }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct TimestampedOp {
    pub action: Action,
    pub ts: Timestamp,
}

impl TimestampedOp {
    pub fn op_ref(&self) -> OpRef {
        OpRef::new(self.action.var().clone(), self.ts)
    }
}

impl fmt::Display for TimestampedOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.action, self.ts)
    }
}

/// A viewfront: for each variable, the timestamp of the earliest op the
/// holder may still observe.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct View(pub BTreeMap<Var, Timestamp>);

impl View {
    pub fn new() -> Self {
        View(BTreeMap::new())
    }

    pub fn get(&self, x: &Var) -> Option<Timestamp> {
        self.0.get(x).copied()
    }

    pub fn set(&mut self, x: Var, ts: Timestamp) {
        self.0.insert(x, ts);
    }

    pub fn with(mut self, x: Var, ts: Timestamp) -> Self {
        self.set(x, ts);
        self
    }

    /// Union of two views with disjoint domains; entries of `other` win on overlap.
    pub fn union(&self, other: &View) -> View {
        let mut out = self.clone();
        for (x, ts) in &other.0 {
            out.0.insert(x.clone(), *ts);
        }
        out
    }

    pub fn restrict<'a>(&self, keep: impl Fn(&Var) -> bool + 'a) -> View {
        View(
            self.0
                .iter()
                .filter(|(x, _)| keep(x))
                .map(|(x, t)| (x.clone(), *t))
                .collect(),
        )
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Timestamp)> {
        self.0.iter()
    }
}

impl fmt::Debug for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.0.iter()).finish()
    }
}

/// `v1 ⊗ v2`: over `dom(v1)`, the later of the two entries.
pub fn merge_views(v1: &View, v2: &View) -> View {
    View(
        v1.0.iter()
            .map(|(x, t1)| match v2.0.get(x) {
                Some(t2) if t2 > t1 => (x.clone(), *t2),
                _ => (x.clone(), *t1),
            })
            .collect(),
    )
}

/// One side (client or library) of the weak-memory state.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct ComponentState {
    pub ops: BTreeMap<Var, BTreeMap<Timestamp, Action>>,
    pub tview: BTreeMap<ThreadId, View>,
    pub mview: BTreeMap<OpRef, View>,
    pub cvd: BTreeSet<OpRef>,
    /// (enqueue timestamp, dequeue timestamp) pairs of consumed queue elements.
    pub matched: BTreeSet<(Timestamp, Timestamp)>,
}

impl fmt::Debug for ComponentState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ops: Vec<String> = self
            .all_ops()
            .map(|op| format!("{}@{}", op.action, op.ts))
            .collect();
        f.debug_struct("ComponentState")
            .field("ops", &ops)
            .field("tview", &self.tview)
            .field("cvd", &self.cvd)
            .field("matched", &self.matched)
            .finish()
    }
}

impl ComponentState {
    pub fn has_var(&self, x: &Var) -> bool {
        self.ops.contains_key(x)
    }

    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        self.ops.keys()
    }

    pub fn op(&self, r: &OpRef) -> Option<&Action> {
        self.ops.get(&r.var).and_then(|m| m.get(&r.ts))
    }

    pub fn ops_on(&self, x: &Var) -> impl DoubleEndedIterator<Item = (&Timestamp, &Action)> {
        self.ops.get(x).into_iter().flat_map(|m| m.iter())
    }

    pub fn all_ops(&self) -> impl Iterator<Item = TimestampedOp> + '_ {
        self.ops.values().flat_map(|m| {
            m.iter().map(|(ts, a)| TimestampedOp {
                action: a.clone(),
                ts: *ts,
            })
        })
    }

    pub fn op_count(&self) -> usize {
        self.ops.values().map(|m| m.len()).sum()
    }

    pub fn insert_op(&mut self, action: Action, ts: Timestamp) {
        self.ops
            .entry(action.var().clone())
            .or_default()
            .insert(ts, action);
    }

    pub fn thread_view(&self, t: ThreadId) -> View {
        self.tview.get(&t).cloned().unwrap_or_default()
    }

    pub fn view_of(&self, t: ThreadId, x: &Var) -> Option<Timestamp> {
        self.tview.get(&t).and_then(|v| v.get(x))
    }

    pub fn is_covered(&self, x: &Var, ts: Timestamp) -> bool {
        self.cvd.contains(&OpRef::new(x.clone(), ts))
    }

    /// `Obs(t, x)`: ops on `x` no earlier than `t`'s viewfront for `x`.
    pub fn observable_ops(&self, t: ThreadId, x: &Var) -> Result<Vec<TimestampedOp>, ModelError> {
        let front = self
            .view_of(t, x)
            .ok_or_else(|| ModelError::UnknownVariable(x.clone()))?;
        Ok(self
            .ops_on(x)
            .filter(|(ts, _)| **ts >= front)
            .map(|(ts, a)| TimestampedOp {
                action: a.clone(),
                ts: *ts,
            })
            .collect())
    }

    pub fn max_ts(&self, x: &Var) -> Result<Timestamp, ModelError> {
        self.ops_on(x)
            .next_back()
            .map(|(ts, _)| *ts)
            .ok_or_else(|| ModelError::NoOps(x.clone()))
    }

    /// The op with the largest timestamp on `x`.
    pub fn max_op(&self, x: &Var) -> Option<TimestampedOp> {
        self.ops_on(x).next_back().map(|(ts, a)| TimestampedOp {
            action: a.clone(),
            ts: *ts,
        })
    }

    /// Last write to `x` among the write ops.
    pub fn last_write(&self, x: &Var) -> Option<TimestampedOp> {
        self.ops_on(x)
            .rev()
            .find(|(_, a)| a.is_write())
            .map(|(ts, a)| TimestampedOp {
                action: a.clone(),
                ts: *ts,
            })
    }

    /// Smallest timestamp of any op (on any variable) strictly after `q`.
    fn next_after(&self, q: Timestamp) -> Option<Timestamp> {
        self.ops
            .values()
            .filter_map(|m| m.range((std::ops::Bound::Excluded(q), std::ops::Bound::Unbounded)).next())
            .map(|(ts, _)| *ts)
            .min()
    }

    /// `fresh(q, q')`: `q < q'` and `q'` precedes every op later than `q`.
    pub fn is_fresh(&self, q: Timestamp, q2: Timestamp) -> bool {
        q < q2 && self.all_ops().all(|op| op.ts <= q || q2 < op.ts)
    }

    /// A fresh timestamp immediately after `q`: the midpoint of the gap to the
    /// next op of this component, or `q + 1` when nothing follows.
    pub fn insert_fresh_timestamp(&self, q: Timestamp) -> Timestamp {
        let fresh = match self.next_after(q) {
            Some(next) => q.midpoint(next),
            None => q.succ(),
        };
        debug_assert!(self.is_fresh(q, fresh));
        fresh
    }

    /// Per-variable rank of every op, used to identify ops across runs whose
    /// absolute timestamps differ.
    pub fn rank_of(&self, x: &Var, ts: Timestamp) -> Option<usize> {
        self.ops.get(x).and_then(|m| m.keys().position(|k| *k == ts))
    }

    /// All distinct timestamps mentioned by this component's ops.
    pub fn timestamps(&self) -> BTreeSet<Timestamp> {
        self.ops.values().flat_map(|m| m.keys().copied()).collect()
    }

    /// Apply a timestamp renaming. `own` renames this component's timestamps;
    /// `foreign` renames entries of mviews that point at the other component.
    pub fn rename(
        &self,
        own: &BTreeMap<Timestamp, Timestamp>,
        foreign: &BTreeMap<Timestamp, Timestamp>,
    ) -> ComponentState {
        let r = |t: &Timestamp| *own.get(t).unwrap_or(t);
        let rename_view = |v: &View| {
            View(
                v.0.iter()
                    .map(|(x, t)| {
                        let nt = if self.ops.contains_key(x) {
                            r(t)
                        } else {
                            *foreign.get(t).unwrap_or(t)
                        };
                        (x.clone(), nt)
                    })
                    .collect(),
            )
        };
        ComponentState {
            ops: self
                .ops
                .iter()
                .map(|(x, m)| (x.clone(), m.iter().map(|(t, a)| (r(t), a.clone())).collect()))
                .collect(),
            tview: self
                .tview
                .iter()
                .map(|(t, v)| (*t, rename_view(v)))
                .collect(),
            mview: self
                .mview
                .iter()
                .map(|(o, v)| (OpRef::new(o.var.clone(), r(&o.ts)), rename_view(v)))
                .collect(),
            cvd: self
                .cvd
                .iter()
                .map(|o| OpRef::new(o.var.clone(), r(&o.ts)))
                .collect(),
            matched: self.matched.iter().map(|(a, b)| (r(a), r(b))).collect(),
        }
    }

    /// Renaming of this component's timestamps onto consecutive integers.
    pub fn ranking(&self) -> BTreeMap<Timestamp, Timestamp> {
        self.timestamps()
            .into_iter()
            .enumerate()
            .map(|(i, t)| (t, Timestamp::from_int(i as i64)))
            .collect()
    }
}

/// Re-rank both components' timestamps to consecutive integers, consistently
/// across the cross-component entries of modification views.
pub fn normalize_pair(client: &ComponentState, library: &ComponentState) -> (ComponentState, ComponentState) {
    let rc = client.ranking();
    let rl = library.ranking();
    (client.rename(&rc, &rl), library.rename(&rl, &rc))
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum ObjectKind {
    Lock,
    Queue,
}

/// What to put in the initial states.
#[derive(Clone, Debug, Default)]
pub struct InitSpec {
    /// Every shared variable with its initial value.
    pub globals: Vec<(Var, Value)>,
    /// Those globals that belong to the library side.
    pub library_vars: BTreeSet<Var>,
    /// Abstract object living in the library state, if any.
    pub object: Option<(Var, ObjectKind)>,
    pub threads: Vec<ThreadId>,
}

#[derive(Clone, Debug)]
pub struct InitialStates {
    pub locals: BTreeMap<ThreadId, LocalState>,
    pub client: ComponentState,
    pub library: ComponentState,
}

/// Build `(ls_Init, γ_Init, β_Init)`: one op per variable (and the object's
/// init op) at timestamp 0, every thread viewing them, and every init op's
/// modification view being the union of the initial thread views.
pub fn make_init_states(spec: &InitSpec) -> Result<InitialStates, ModelError> {
    let mut client = ComponentState::default();
    let mut library = ComponentState::default();
    let mut seen = BTreeSet::new();
    for (x, v) in &spec.globals {
        if !seen.insert(x.clone()) {
            return Err(ModelError::DuplicateInit(x.clone()));
        }
        let target = if spec.library_vars.contains(x) {
            &mut library
        } else {
            &mut client
        };
        target.insert_op(
            Action::Write {
                var: x.clone(),
                value: *v,
                release: false,
            },
            Timestamp::ZERO,
        );
    }
    if let Some((o, kind)) = &spec.object {
        if !seen.insert(o.clone()) {
            return Err(ModelError::DuplicateInit(o.clone()));
        }
        let action = match kind {
            ObjectKind::Lock => Action::LockInit { lock: o.clone() },
            ObjectKind::Queue => Action::QueueInit { queue: o.clone() },
        };
        library.insert_op(action, Timestamp::ZERO);
    }

    let init_view = |c: &ComponentState| View(c.vars().map(|x| (x.clone(), Timestamp::ZERO)).collect());
    let cview = init_view(&client);
    let lview = init_view(&library);
    let joint = cview.union(&lview);
    for t in &spec.threads {
        client.tview.insert(*t, cview.clone());
        library.tview.insert(*t, lview.clone());
    }
    for c in [&mut client, &mut library] {
        let refs: Vec<OpRef> = c.all_ops().map(|op| op.op_ref()).collect();
        for r in refs {
            c.mview.insert(r, joint.clone());
        }
    }
    let locals = spec
        .threads
        .iter()
        .map(|t| (*t, LocalState::new()))
        .collect();
    Ok(InitialStates {
        locals,
        client,
        library,
    })
}
