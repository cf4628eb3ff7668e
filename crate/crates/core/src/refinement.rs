//! Refinement of the abstract lock by concrete implementations.
//!
//! A client program is run twice: once against the abstract object and once
//! with every call replaced by an implementation body whose variables live in
//! the library state. The concrete system refines the abstract one when every
//! concrete run is matched by an abstract run that looks the same to the
//! client: same program counters, client registers and client memory, with
//! the concrete threads possibly *more* synchronised (their observable client
//! writes form a subset of the abstract ones).
//!
//! Two independent checks are offered. [`check_simulation`] solves a forward
//! simulation game: client steps must be answered by the same client step,
//! library steps by a stutter or by an abstract object step of the same
//! thread. [`check_trace_inclusion`] instead runs a subset construction over
//! client projections of whole traces.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::error::ModelError;
use crate::explore::{build_graph, Configuration, ExploreOptions, StateGraph, System, WitnessStep};
use crate::litmus::{parse_body, LitmusError, LitmusFile};
use crate::outline::Verdict;
use crate::program::{Body, Cmd, Expr, Method};
use crate::state::{ComponentState, InitSpec, ObjectKind};
use crate::types::{Component, Reg, ThreadId, Value, Var};

#[derive(Debug, Error)]
pub enum RefinementError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Litmus(#[from] LitmusError),
    #[error("the client declares no lock object")]
    NoLock,
    #[error("unknown implementation `{0}` (expected seqlock, ticketlock, seqlock-relaxed or ticketlock-relaxed)")]
    UnknownImpl(String),
    #[error("implementation name `{0}` clashes with a client name")]
    NameClash(String),
}

/// The bundled lock implementations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LockImpl {
    Seqlock,
    Ticketlock,
    /// Sequence lock releasing with a relaxed write.
    SeqlockRelaxed,
    /// Ticket lock releasing with a relaxed write.
    TicketlockRelaxed,
}

impl LockImpl {
    pub const ALL: [LockImpl; 4] = [
        LockImpl::Seqlock,
        LockImpl::Ticketlock,
        LockImpl::SeqlockRelaxed,
        LockImpl::TicketlockRelaxed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LockImpl::Seqlock => "seqlock",
            LockImpl::Ticketlock => "ticketlock",
            LockImpl::SeqlockRelaxed => "seqlock-relaxed",
            LockImpl::TicketlockRelaxed => "ticketlock-relaxed",
        }
    }

    /// Whether the implementation is expected to refine the abstract lock.
    pub fn is_correct(self) -> bool {
        matches!(self, LockImpl::Seqlock | LockImpl::Ticketlock)
    }

    pub fn implementation(self) -> Implementation {
        let (vars, acquire, release): (&[&str], &str, &str) = match self {
            LockImpl::Seqlock => (
                &["glb"],
                "do do r <-A glb until even(r); loc <- CAS(glb, r, r + 1) until loc",
                "glb :=R r + 2",
            ),
            LockImpl::SeqlockRelaxed => (
                &["glb"],
                "do do r <-A glb until even(r); loc <- CAS(glb, r, r + 1) until loc",
                "glb := r + 2",
            ),
            LockImpl::Ticketlock => (&["nt", "sn"], "m_t <- FAI(nt); do s_n <-A sn until m_t = s_n", "sn :=R s_n + 1"),
            LockImpl::TicketlockRelaxed => {
                (&["nt", "sn"], "m_t <- FAI(nt); do s_n <-A sn until m_t = s_n", "sn := s_n + 1")
            }
        };
        let acquire_ret = match self {
            LockImpl::Seqlock | LockImpl::SeqlockRelaxed => Expr::reg("loc"),
            _ => Expr::lit(true),
        };
        let body = |src: &str, ret: Expr| Body {
            cmd: parse_body(src, vars).expect("built-in implementation parses"),
            ret,
        };
        Implementation {
            name: self.name().to_string(),
            library_vars: vars.iter().map(|v| (Var::new(v), Value::Int(0))).collect(),
            acquire: body(acquire, acquire_ret),
            release: body(release, Expr::Lit(Value::Bot)),
        }
    }
}

impl FromStr for LockImpl {
    type Err = RefinementError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LockImpl::ALL
            .into_iter()
            .find(|i| i.name() == s)
            .ok_or_else(|| RefinementError::UnknownImpl(s.to_string()))
    }
}

impl fmt::Display for LockImpl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A lock implementation: library variables and method bodies.
#[derive(Clone, Debug)]
pub struct Implementation {
    pub name: String,
    pub library_vars: Vec<(Var, Value)>,
    pub acquire: Body,
    pub release: Body,
}

/// The abstract and concrete systems of one client.
#[derive(Clone, Debug)]
pub struct Instance {
    pub abstract_sys: System,
    pub abstract_init: Configuration,
    pub concrete_sys: System,
    pub concrete_init: Configuration,
    /// Client registers compared between the two sides, per thread.
    pub compared: BTreeMap<ThreadId, BTreeSet<Reg>>,
    pub client_vars: BTreeSet<Var>,
}

impl Instance {
    /// Pair the client in `file` (which must declare a lock) with `imp`.
    pub fn new(file: &LitmusFile, imp: &Implementation) -> Result<Instance, RefinementError> {
        let object = file.object_spec().filter(|o| o.kind == ObjectKind::Lock).ok_or(RefinementError::NoLock)?;
        let model = file.model()?;
        let spec = file.init_spec();
        let client_vars: BTreeSet<Var> = spec.globals.iter().map(|(x, _)| x.clone()).collect();

        let mut client_names: BTreeSet<String> = client_vars.iter().map(|v| v.to_string()).collect();
        client_names.insert(object.name.to_string());
        for t in &file.threads {
            client_names.extend(file.thread_registers(t.id).iter().map(|r| r.to_string()));
        }
        let (_, acq_regs) = Cmd::Call(crate::program::Hole::Body(Box::new(imp.acquire.clone()))).registers();
        let (_, rel_regs) = Cmd::Call(crate::program::Hole::Body(Box::new(imp.release.clone()))).registers();
        let lib_names = imp
            .library_vars
            .iter()
            .map(|(x, _)| x.to_string())
            .chain(acq_regs.iter().chain(&rel_regs).map(|r| r.to_string()));
        for n in lib_names {
            if client_names.contains(&n) {
                return Err(RefinementError::NameClash(n));
            }
        }

        let programs: BTreeMap<ThreadId, Cmd> = file
            .programs()
            .into_iter()
            .map(|(t, c)| {
                let filled = c.fill_calls(&|call| {
                    (call.object == object.name).then(|| match call.method {
                        Method::Acquire => imp.acquire.clone(),
                        _ => imp.release.clone(),
                    })
                });
                (t, filled)
            })
            .collect();
        let concrete_spec = InitSpec {
            globals: spec.globals.iter().cloned().chain(imp.library_vars.iter().cloned()).collect(),
            library_vars: imp.library_vars.iter().map(|(x, _)| x.clone()).collect(),
            object: None,
            threads: spec.threads.clone(),
        };
        let concrete_sys = System::new(vec![]);
        let concrete_init = concrete_sys.initial(&concrete_spec, programs, &file.local_inits())?;

        let compared = file
            .threads
            .iter()
            .map(|t| {
                let versions = t.body.version_registers();
                let regs = file
                    .thread_registers(t.id)
                    .into_iter()
                    .filter(|r| !versions.contains(r))
                    .collect();
                (ThreadId(t.id), regs)
            })
            .collect();
        Ok(Instance {
            abstract_sys: model.system,
            abstract_init: model.init,
            concrete_sys,
            concrete_init,
            compared,
            client_vars,
        })
    }
}

/// What a client can see of a configuration. Client operations are named by
/// variable and per-variable rank, views by per-variable ranks.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct ClientView {
    pub pcs: BTreeMap<ThreadId, Option<u32>>,
    pub regs: BTreeMap<ThreadId, BTreeMap<Reg, Value>>,
    /// Return values of the last library call; compared by the simulation
    /// only, since an implementation may publish it at a different step.
    pub rvals: BTreeMap<ThreadId, Value>,
    pub ops: BTreeMap<Var, Vec<crate::action::Action>>,
    pub cvd: BTreeSet<(Var, usize)>,
    pub mview: BTreeMap<(Var, usize), BTreeMap<Var, usize>>,
    pub tview: BTreeMap<ThreadId, BTreeMap<Var, usize>>,
}

fn ranked_view(st: &ComponentState, v: &crate::state::View, vars: &BTreeSet<Var>) -> BTreeMap<Var, usize> {
    v.iter()
        .filter(|(x, _)| vars.contains(*x))
        .filter_map(|(x, ts)| st.rank_of(x, *ts).map(|r| (x.clone(), r)))
        .collect()
}

impl ClientView {
    pub fn of(inst: &Instance, cfg: &Configuration) -> ClientView {
        let st = &cfg.client;
        let vars = &inst.client_vars;
        let pcs = cfg.threads().map(|t| (t, cfg.pc(t))).collect();
        let regs = inst
            .compared
            .iter()
            .map(|(t, rs)| {
                let vals = rs.iter().map(|r| (r.clone(), cfg.local(*t, r).unwrap_or(Value::Bot))).collect();
                (*t, vals)
            })
            .collect();
        let rvals = cfg
            .threads()
            .map(|t| (t, cfg.local(t, &Reg::rval()).unwrap_or(Value::Bot)))
            .collect();
        let ops = vars
            .iter()
            .map(|x| (x.clone(), st.ops_on(x).map(|(_, a)| a.clone()).collect()))
            .collect();
        let cvd = st
            .cvd
            .iter()
            .filter_map(|o| st.rank_of(&o.var, o.ts).map(|r| (o.var.clone(), r)))
            .collect();
        let mview = st
            .mview
            .iter()
            .filter(|(o, _)| vars.contains(&o.var))
            .filter_map(|(o, v)| st.rank_of(&o.var, o.ts).map(|r| ((o.var.clone(), r), ranked_view(st, v, vars))))
            .collect();
        let tview = st.tview.iter().map(|(t, v)| (*t, ranked_view(st, v, vars))).collect();
        ClientView {
            pcs,
            regs,
            rvals,
            ops,
            cvd,
            mview,
            tview,
        }
    }

    /// The same view with return values erased.
    pub fn without_rvals(mut self) -> ClientView {
        self.rvals.clear();
        self
    }

    /// `self ⊑ other`: equal except that views of `self` may be later
    /// (fewer observable writes), pointwise.
    pub fn refines(&self, other: &ClientView) -> bool {
        fn ge(a: &BTreeMap<Var, usize>, b: &BTreeMap<Var, usize>) -> bool {
            b.iter().all(|(x, r)| a.get(x).is_some_and(|ra| ra >= r))
        }
        self.pcs == other.pcs
            && self.regs == other.regs
            && self.rvals == other.rvals
            && self.ops == other.ops
            && self.cvd == other.cvd
            && self.mview.len() == other.mview.len()
            && self.mview.iter().all(|(k, v)| other.mview.get(k).is_some_and(|w| ge(v, w)))
            && self.tview.len() == other.tview.len()
            && self.tview.iter().all(|(t, v)| other.tview.get(t).is_some_and(|w| ge(v, w)))
    }

    /// A human-readable reason why `self ⊑ other` fails.
    pub fn mismatch(&self, other: &ClientView) -> Option<String> {
        if self.refines(other) {
            return None;
        }
        Some(if self.pcs != other.pcs {
            format!("program counters differ: concrete {:?}, abstract {:?}", self.pcs, other.pcs)
        } else if self.regs != other.regs {
            format!("registers differ: concrete {:?}, abstract {:?}", self.regs, other.regs)
        } else if self.rvals != other.rvals {
            format!("return values differ: concrete {:?}, abstract {:?}", self.rvals, other.rvals)
        } else if self.ops != other.ops || self.cvd != other.cvd {
            "client memory differs".to_string()
        } else {
            let mut worst = String::from("client views differ");
            for (t, v) in &self.tview {
                for (x, r) in other.tview.get(t).into_iter().flatten() {
                    if v.get(x).is_none_or(|rc| rc < r) {
                        worst = format!(
                            "thread {t} can observe {x}#{} concretely but only from {x}#{r} abstractly",
                            v.get(x).copied().unwrap_or(0)
                        );
                    }
                }
            }
            worst
        })
    }
}

/// Client projection of a run with consecutive repetitions removed.
pub fn project_and_destutter(inst: &Instance, run: &[Configuration]) -> Vec<ClientView> {
    let mut out: Vec<ClientView> = Vec::new();
    for cfg in run {
        let v = ClientView::of(inst, cfg).without_rvals();
        if out.last() != Some(&v) {
            out.push(v);
        }
    }
    out
}

/// The state-correspondence condition of the simulation.
pub fn state_refines(inst: &Instance, abs: &Configuration, conc: &Configuration) -> bool {
    ClientView::of(inst, conc).refines(&ClientView::of(inst, abs))
}

/// One concrete step of a counterexample and the abstract answer chosen.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MatchedStep {
    pub concrete: WitnessStep,
    /// `None` for a stutter.
    #[serde(rename = "abstract")]
    pub abstract_: Option<WitnessStep>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Counterexample {
    pub steps: Vec<MatchedStep>,
    pub reason: String,
}

impl Counterexample {
    /// Only the concrete side, in witness-path format.
    pub fn concrete_path(&self) -> Vec<WitnessStep> {
        self.steps.iter().map(|s| s.concrete.clone()).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulationReport {
    pub verdict: Verdict,
    pub abstract_states: usize,
    pub concrete_states: usize,
    /// Pairs explored by the game.
    pub pairs: usize,
    pub truncated: bool,
    pub counterexample: Option<Counterexample>,
}

impl SimulationReport {
    pub fn holds(&self) -> bool {
        self.verdict != Verdict::Violated
    }
}

/// A candidate answer: game node and the abstract edge taken (`None` for a
/// stutter).
type Answer = (usize, Option<usize>);

struct Game {
    nodes: Vec<(usize, usize)>,
    index: HashMap<(usize, usize), usize>,
    /// Per node, per concrete edge: the candidate answers.
    moves: Vec<Vec<Vec<Answer>>>,
    related: Vec<bool>,
    reasons: Vec<Option<String>>,
}

/// Solve the forward simulation game up to `opts.max_steps` concrete steps.
pub fn check_simulation(inst: &Instance, opts: ExploreOptions) -> Result<SimulationReport, ModelError> {
    let ag = build_graph(&inst.abstract_sys, &inst.abstract_init, opts)?;
    let cg = build_graph(&inst.concrete_sys, &inst.concrete_init, opts)?;
    let aviews: Vec<ClientView> = ag.nodes.iter().map(|c| ClientView::of(inst, c)).collect();
    let cviews: Vec<ClientView> = cg.nodes.iter().map(|c| ClientView::of(inst, c)).collect();

    let mut game = Game {
        nodes: vec![],
        index: HashMap::new(),
        moves: vec![],
        related: vec![],
        reasons: vec![],
    };
    let add = |g: &mut Game, a: usize, c: usize, queue: &mut VecDeque<usize>| -> usize {
        if let Some(&i) = g.index.get(&(a, c)) {
            return i;
        }
        let i = g.nodes.len();
        g.nodes.push((a, c));
        g.index.insert((a, c), i);
        let reason = cviews[c].mismatch(&aviews[a]);
        g.related.push(reason.is_none());
        if reason.is_none() {
            queue.push_back(i);
        }
        g.reasons.push(reason);
        g.moves.push(vec![]);
        i
    };
    let mut queue = VecDeque::new();
    add(&mut game, 0, 0, &mut queue);
    while let Some(i) = queue.pop_front() {
        let (a, c) = game.nodes[i];
        let mut moves = Vec::with_capacity(cg.edges[c].len());
        for ce in &cg.edges[c] {
            let mut cands = Vec::new();
            if ce.component == Component::Library {
                cands.push((add(&mut game, a, ce.target, &mut queue), None));
            }
            for (k, ae) in ag.edges[a].iter().enumerate() {
                let ok = ae.thread == ce.thread
                    && match ce.component {
                        Component::Client => ae.component == Component::Client && ae.label == ce.label,
                        Component::Library => ae.component == Component::Library,
                    };
                if ok {
                    cands.push((add(&mut game, ae.target, ce.target, &mut queue), Some(k)));
                }
            }
            moves.push(cands);
        }
        game.moves[i] = moves;
    }

    // Greatest fixpoint, one synchronous round at a time so that every node
    // removed in round r has a move whose answers all died before r.
    let n = game.nodes.len();
    let mut removed: Vec<Option<usize>> = (0..n).map(|i| (!game.related[i]).then_some(0)).collect();
    let mut round = 0;
    loop {
        round += 1;
        let dead: Vec<usize> = (0..n)
            .filter(|&i| removed[i].is_none())
            .filter(|&i| {
                game.moves[i]
                    .iter()
                    .any(|cands| cands.iter().all(|(j, _)| removed[*j].is_some()))
            })
            .collect();
        if dead.is_empty() {
            break;
        }
        for i in dead {
            removed[i] = Some(round);
        }
    }

    let truncated = ag.truncated() || cg.truncated();
    let counterexample = removed[0].map(|_| extract_counterexample(&game, &removed, &ag, &cg));
    let verdict = match (&counterexample, truncated) {
        (Some(_), _) => Verdict::Violated,
        (None, true) => Verdict::UnknownBeyondBound,
        (None, false) => Verdict::Valid,
    };
    Ok(SimulationReport {
        verdict,
        abstract_states: ag.len(),
        concrete_states: cg.len(),
        pairs: n,
        truncated,
        counterexample,
    })
}

fn extract_counterexample(game: &Game, removed: &[Option<usize>], ag: &StateGraph, cg: &StateGraph) -> Counterexample {
    let mut steps = Vec::new();
    let mut i = 0;
    loop {
        if let Some(reason) = &game.reasons[i] {
            return Counterexample {
                steps,
                reason: reason.clone(),
            };
        }
        let r = removed[i].expect("walk stays on removed nodes");
        let (a, c) = game.nodes[i];
        let (e, cands) = game.moves[i]
            .iter()
            .enumerate()
            .find(|(_, cands)| cands.iter().all(|(j, _)| removed[*j].is_some_and(|rj| rj < r)))
            .expect("a removed node has a losing move");
        let ce = &cg.edges[c][e];
        let concrete = WitnessStep {
            thread: ce.thread,
            label: ce.label.clone(),
        };
        let Some(&(j, k)) = cands.iter().max_by_key(|(j, _)| removed[*j]) else {
            steps.push(MatchedStep {
                concrete,
                abstract_: None,
            });
            return Counterexample {
                steps,
                reason: format!("no abstract step of thread {} answers `{}`", ce.thread, ce.label),
            };
        };
        let abstract_ = k.map(|k| {
            let ae = &ag.edges[a][k];
            WitnessStep {
                thread: ae.thread,
                label: ae.label.clone(),
            }
        });
        steps.push(MatchedStep { concrete, abstract_ });
        i = j;
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceReport {
    pub verdict: Verdict,
    /// Explored (concrete state, abstract state set) pairs.
    pub explored: usize,
    pub truncated: bool,
    /// A concrete run whose projection no abstract run matches.
    pub witness: Option<Vec<WitnessStep>>,
}

/// Check that every concrete trace's client projection is matched by some
/// abstract trace, by tracking the set of abstract states consistent with
/// the concrete run so far.
pub fn check_trace_inclusion(inst: &Instance, opts: ExploreOptions) -> Result<TraceReport, ModelError> {
    let ag = build_graph(&inst.abstract_sys, &inst.abstract_init, opts)?;
    let cg = build_graph(&inst.concrete_sys, &inst.concrete_init, opts)?;
    let aviews: Vec<ClientView> = ag.nodes.iter().map(|c| ClientView::of(inst, c).without_rvals()).collect();
    let cviews: Vec<ClientView> = cg.nodes.iter().map(|c| ClientView::of(inst, c).without_rvals()).collect();

    // close a set under abstract steps that leave the projection unchanged
    let close = |mut set: BTreeSet<usize>| -> BTreeSet<usize> {
        let mut work: Vec<usize> = set.iter().copied().collect();
        while let Some(a) = work.pop() {
            for e in &ag.edges[a] {
                if aviews[e.target] == aviews[a] && set.insert(e.target) {
                    work.push(e.target);
                }
            }
        }
        set
    };
    let admit = |set: BTreeSet<usize>, c: usize| -> BTreeSet<usize> {
        set.into_iter().filter(|a| cviews[c].refines(&aviews[*a])).collect()
    };

    let start = admit(close(BTreeSet::from([0])), 0);
    let mut seen: HashMap<(usize, BTreeSet<usize>), usize> = HashMap::new();
    let mut parent: Vec<Option<(usize, WitnessStep)>> = vec![];
    let mut queue = VecDeque::new();
    let path = |parent: &Vec<Option<(usize, WitnessStep)>>, mut i: usize| {
        let mut rev = vec![];
        while let Some((p, w)) = &parent[i] {
            rev.push(w.clone());
            i = *p;
        }
        rev.reverse();
        rev
    };
    let truncated = ag.truncated() || cg.truncated();
    let report = |verdict, explored, witness| TraceReport {
        verdict,
        explored,
        truncated,
        witness,
    };
    if start.is_empty() {
        return Ok(report(Verdict::Violated, 1, Some(vec![])));
    }
    seen.insert((0, start.clone()), 0);
    parent.push(None);
    queue.push_back((0usize, start, 0usize));
    while let Some((c, set, id)) = queue.pop_front() {
        for ce in &cg.edges[c] {
            let mut next: BTreeSet<usize> = set.clone();
            for &a in &set {
                next.extend(ag.edges[a].iter().map(|e| e.target));
            }
            let next = admit(close(next), ce.target);
            let step = WitnessStep {
                thread: ce.thread,
                label: ce.label.clone(),
            };
            if next.is_empty() {
                let mut w = path(&parent, id);
                w.push(step);
                return Ok(report(Verdict::Violated, seen.len(), Some(w)));
            }
            let key = (ce.target, next);
            if !seen.contains_key(&key) {
                let nid = parent.len();
                parent.push(Some((id, step)));
                seen.insert(key.clone(), nid);
                queue.push_back((key.0, key.1, nid));
            }
        }
    }
    let verdict = if truncated {
        Verdict::UnknownBeyondBound
    } else {
        Verdict::Valid
    };
    Ok(report(verdict, seen.len(), None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::litmus::parse_litmus;

    const CLIENT: &str = r#"
litmus "one-thread"
init d := 0;
object l : lock;
thread 1
  1: if l.acquire() then 2: d := 5; 3: l.release() end
  4:
end
thread 2
  1: if l.acquire() then 2: r <- d; 3: l.release() end
  4:
end
"#;

    #[test]
    fn implementations_parse() {
        for i in LockImpl::ALL {
            let imp = i.implementation();
            assert!(!imp.library_vars.is_empty());
            assert_eq!(i.name().parse::<LockImpl>().unwrap(), i);
        }
        assert!("spinlock".parse::<LockImpl>().is_err());
    }

    #[test]
    fn name_clash_is_reported() {
        let f = parse_litmus(CLIENT).unwrap();
        let err = Instance::new(&f, &LockImpl::Seqlock.implementation()).unwrap_err();
        assert!(matches!(err, RefinementError::NameClash(n) if n == "r"));
    }

    #[test]
    fn ticket_lock_simulates_on_small_client() {
        let f = parse_litmus(&CLIENT.replace("r <- d", "v <- d")).unwrap();
        let inst = Instance::new(&f, &LockImpl::Ticketlock.implementation()).unwrap();
        let rep = check_simulation(&inst, ExploreOptions::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::Valid, "{:?}", rep.counterexample);
        let bad = Instance::new(&f, &LockImpl::TicketlockRelaxed.implementation()).unwrap();
        let rep = check_simulation(&bad, ExploreOptions::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::Violated);
        assert!(!rep.counterexample.unwrap().steps.is_empty());
    }

    #[test]
    fn destuttering_removes_repeats() {
        let f = parse_litmus(&CLIENT.replace("r <- d", "v <- d")).unwrap();
        let inst = Instance::new(&f, &LockImpl::Seqlock.implementation()).unwrap();
        let c = inst.concrete_init.clone();
        assert_eq!(project_and_destutter(&inst, &[c.clone(), c.clone(), c]).len(), 1);
    }
}
