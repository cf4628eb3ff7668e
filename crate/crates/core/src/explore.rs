//! Composed semantics and exhaustive exploration.
//!
//! The explorer takes *macro-steps*: a thread performs one memory or object
//! action and is then run through its subsequent silent steps. Silent steps
//! never touch the shared states, so this only removes intermediate program
//! counters that no assertion can distinguish; `if l.acquire()` thereby moves
//! from its label straight into the branch. States are normalised after every
//! macro-step, so structural equality of configurations is the canonical key.

use std::collections::{BTreeMap, HashMap, VecDeque};

use rayon::prelude::*;
use serde::Serialize;

use crate::action::Action;
use crate::error::ModelError;
use crate::memory::{mem_step, written_values};
use crate::objects::{object_step, ObjectSpec};
use crate::program::{local_step, resolve_call, Cmd, Effect, LocalState};
use crate::state::{make_init_states, normalize_pair, ComponentState, InitSpec};
use crate::types::{Component, Reg, ThreadId, Value, Var};

/// Bound on consecutive silent steps of one thread.
pub const MAX_SILENT: usize = 10_000;

/// Default exploration depth in macro-steps.
pub const DEFAULT_MAX_STEPS: usize = 64;

/// `(P, ρ, γ, β)`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Configuration {
    pub programs: BTreeMap<ThreadId, Cmd>,
    pub locals: BTreeMap<ThreadId, LocalState>,
    pub client: ComponentState,
    pub library: ComponentState,
}

/// A finished thread: `⊥`, possibly under its end label.
pub fn is_finished(c: &Cmd) -> bool {
    match c {
        Cmd::Skip => true,
        Cmd::Labelled(_, c) => is_finished(c),
        _ => false,
    }
}

impl Configuration {
    pub fn threads(&self) -> impl Iterator<Item = ThreadId> + '_ {
        self.programs.keys().copied()
    }

    /// Program counter of `t`: the label of its next statement.
    pub fn pc(&self, t: ThreadId) -> Option<u32> {
        self.programs.get(&t).and_then(|c| c.current_label())
    }

    pub fn is_terminal(&self) -> bool {
        self.programs.values().all(is_finished)
    }

    pub fn local(&self, t: ThreadId, r: &Reg) -> Option<Value> {
        self.locals.get(&t).and_then(|ls| ls.get(r))
    }

    /// The state owning global `x`, if any.
    pub fn owner_of(&self, x: &Var) -> Option<Component> {
        if self.client.has_var(x) {
            Some(Component::Client)
        } else if self.library.has_var(x) {
            Some(Component::Library)
        } else {
            None
        }
    }

    pub fn state(&self, c: Component) -> &ComponentState {
        match c {
            Component::Client => &self.client,
            Component::Library => &self.library,
        }
    }

    fn normalized(mut self) -> Self {
        let (c, l) = normalize_pair(&self.client, &self.library);
        self.client = c;
        self.library = l;
        self
    }
}

/// Key under which configurations are memoised: the configuration with both
/// components' timestamps re-ranked to consecutive integers.
pub fn canonical_key(cfg: &Configuration) -> Configuration {
    cfg.clone().normalized()
}

/// One macro-step.
#[derive(Clone, Debug)]
pub struct Step {
    pub thread: ThreadId,
    /// Deterministic description used to replay witnesses.
    pub label: String,
    pub component: Component,
    pub action: Option<Action>,
    pub target: Configuration,
}

/// The objects a program can call.
#[derive(Clone, Debug, Default)]
pub struct System {
    pub objects: Vec<ObjectSpec>,
}

impl System {
    pub fn new(objects: Vec<ObjectSpec>) -> Self {
        System { objects }
    }

    fn object(&self, o: &Var) -> Result<&ObjectSpec, ModelError> {
        self.objects
            .iter()
            .find(|s| &s.name == o)
            .ok_or_else(|| ModelError::UnknownObject(o.clone()))
    }

    /// Initial configuration: initial states, per-thread local
    /// initialisations, and every thread advanced past its leading silent steps.
    pub fn initial(
        &self,
        spec: &InitSpec,
        programs: BTreeMap<ThreadId, Cmd>,
        local_inits: &BTreeMap<ThreadId, Vec<(Reg, Value)>>,
    ) -> Result<Configuration, ModelError> {
        let init = make_init_states(spec)?;
        let mut locals = init.locals;
        for t in programs.keys() {
            let ls = locals.entry(*t).or_default();
            for (r, v) in local_inits.get(t).into_iter().flatten() {
                ls.set(r.clone(), *v);
            }
        }
        let mut cfg = Configuration {
            programs,
            locals,
            client: init.client,
            library: init.library,
        };
        let ts: Vec<ThreadId> = cfg.threads().collect();
        for t in ts {
            self.close(&mut cfg, t)?;
        }
        Ok(cfg.normalized())
    }

    fn read_domain<'a>(cfg: &'a Configuration) -> impl Fn(&Var) -> Vec<Value> + 'a {
        move |x: &Var| {
            if cfg.client.has_var(x) {
                written_values(&cfg.client, x)
            } else {
                written_values(&cfg.library, x)
            }
        }
    }

    /// Run `t` through silent steps until it performs an action, blocks or finishes.
    fn close(&self, cfg: &mut Configuration, t: ThreadId) -> Result<(), ModelError> {
        for _ in 0..MAX_SILENT {
            let steps = {
                let dom = Self::read_domain(cfg);
                local_step(&cfg.programs[&t], &cfg.locals[&t], &dom)?
            };
            match steps.as_slice() {
                [s] if s.effect == Effect::Silent => {
                    cfg.programs.insert(t, s.cmd.clone());
                    cfg.locals.insert(t, s.ls.clone());
                }
                _ => return Ok(()),
            }
        }
        Err(ModelError::Divergence(t, MAX_SILENT))
    }

    /// Every macro-step of every thread from `cfg`, in thread order.
    pub fn successors(&self, cfg: &Configuration) -> Result<Vec<Step>, ModelError> {
        let mut out = Vec::new();
        for t in cfg.threads() {
            self.thread_successors(cfg, t, &mut out)?;
        }
        Ok(out)
    }

    /// Macro-steps of thread `t` only.
    pub fn thread_successors(&self, cfg: &Configuration, t: ThreadId, out: &mut Vec<Step>) -> Result<(), ModelError> {
        let steps = {
            let dom = Self::read_domain(cfg);
            local_step(&cfg.programs[&t], &cfg.locals[&t], &dom)?
        };
        for s in steps {
            let mut raw: Vec<(String, Option<Action>, Configuration)> = Vec::new();
            match &s.effect {
                Effect::Silent => {
                    let mut next = cfg.clone();
                    next.programs.insert(t, s.cmd.clone());
                    next.locals.insert(t, s.ls.clone());
                    raw.push(("tau".into(), None, next));
                }
                Effect::Action(a) => {
                    let (exec, ctx) = match s.component {
                        Component::Client => (&cfg.client, &cfg.library),
                        Component::Library => (&cfg.library, &cfg.client),
                    };
                    let x = a.var();
                    for tr in mem_step(exec, ctx, t, a) {
                        let rank = exec.rank_of(x, tr.pred).unwrap_or(0);
                        let how = if matches!(a, Action::Read { .. }) { "from" } else { "after" };
                        let mut next = cfg.clone();
                        next.programs.insert(t, s.cmd.clone());
                        next.locals.insert(t, s.ls.clone());
                        match s.component {
                            Component::Client => {
                                next.client = tr.exec;
                                next.library = tr.ctx;
                            }
                            Component::Library => {
                                next.library = tr.exec;
                                next.client = tr.ctx;
                            }
                        }
                        raw.push((format!("{a} {how} {x}#{rank}"), Some(a.clone()), next));
                    }
                }
                Effect::Call { object, method, arg } => {
                    let spec = self.object(object)?;
                    for o in object_step(spec, &cfg.library, &cfg.client, t, *method, *arg) {
                        let (cmd, ls) = resolve_call(&s.cmd, &s.ls, o.rval, o.version);
                        let label = match spec.kind {
                            crate::state::ObjectKind::Lock => o.action.to_string(),
                            crate::state::ObjectKind::Queue => {
                                let rank = cfg.library.rank_of(object, o.after).unwrap_or(0);
                                format!("{} after {object}#{rank}", o.action)
                            }
                        };
                        let mut next = cfg.clone();
                        next.programs.insert(t, cmd);
                        next.locals.insert(t, ls);
                        next.library = o.lib;
                        next.client = o.client;
                        raw.push((label, Some(o.action), next));
                    }
                }
            }
            for (label, action, mut next) in raw {
                self.close(&mut next, t)?;
                out.push(Step {
                    thread: t,
                    label,
                    component: s.component,
                    action,
                    target: next.normalized(),
                });
            }
        }
        Ok(())
    }

    /// Re-execute a witness path.
    pub fn replay(&self, init: &Configuration, path: &[WitnessStep]) -> Result<Configuration, ReplayError> {
        let mut cur = init.clone();
        for (i, w) in path.iter().enumerate() {
            let mut steps = Vec::new();
            self.thread_successors(&cur, w.thread, &mut steps)
                .map_err(ReplayError::Model)?;
            cur = steps
                .into_iter()
                .find(|s| s.label == w.label)
                .ok_or(ReplayError::NoSuchStep(i))?
                .target;
        }
        Ok(cur)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error(transparent)]
    Model(ModelError),
    #[error("witness step {0} is not enabled")]
    NoSuchStep(usize),
}

/// One step of a witness path.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WitnessStep {
    pub thread: ThreadId,
    pub label: String,
}

#[derive(Clone, Debug)]
pub struct Edge {
    pub thread: ThreadId,
    pub label: String,
    pub component: Component,
    pub action: Option<Action>,
    pub target: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct ExploreOptions {
    pub max_steps: usize,
    /// Worker threads; 1 explores sequentially.
    pub jobs: usize,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        ExploreOptions {
            max_steps: DEFAULT_MAX_STEPS,
            jobs: 1,
        }
    }
}

/// The reachable state graph, in breadth-first discovery order.
#[derive(Clone, Debug, Default)]
pub struct StateGraph {
    pub nodes: Vec<Configuration>,
    pub depth: Vec<usize>,
    /// BFS tree: predecessor and the edge index leading here.
    pub parent: Vec<Option<(usize, usize)>>,
    pub edges: Vec<Vec<Edge>>,
    /// Nodes at the depth bound that still had enabled steps.
    pub cut: Vec<bool>,
    index: HashMap<Configuration, usize>,
}

impl StateGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn truncated(&self) -> bool {
        self.cut.iter().any(|c| *c)
    }

    pub fn lookup(&self, cfg: &Configuration) -> Option<usize> {
        self.index.get(cfg).copied()
    }

    /// Path from the initial node to `i`.
    pub fn path_to(&self, mut i: usize) -> Vec<WitnessStep> {
        let mut rev = Vec::new();
        while let Some((p, e)) = self.parent[i] {
            let edge = &self.edges[p][e];
            rev.push(WitnessStep {
                thread: edge.thread,
                label: edge.label.clone(),
            });
            i = p;
        }
        rev.reverse();
        rev
    }

    /// Path to `i` followed by the edge `e` out of it.
    pub fn path_via(&self, i: usize, e: usize) -> Vec<WitnessStep> {
        let mut p = self.path_to(i);
        let edge = &self.edges[i][e];
        p.push(WitnessStep {
            thread: edge.thread,
            label: edge.label.clone(),
        });
        p
    }

    fn add(&mut self, cfg: Configuration, depth: usize, parent: Option<(usize, usize)>) -> (usize, bool) {
        if let Some(&i) = self.index.get(&cfg) {
            return (i, false);
        }
        let i = self.nodes.len();
        self.index.insert(cfg.clone(), i);
        self.nodes.push(cfg);
        self.depth.push(depth);
        self.parent.push(parent);
        self.edges.push(Vec::new());
        self.cut.push(false);
        (i, true)
    }
}

/// Breadth-first construction of the state graph up to `max_steps`
/// macro-steps. With `jobs > 1` each level's successors are computed in
/// parallel and merged in frontier order, so the result is identical.
pub fn build_graph(sys: &System, init: &Configuration, opts: ExploreOptions) -> Result<StateGraph, ModelError> {
    let mut g = StateGraph::default();
    g.add(init.clone(), 0, None);
    let mut frontier = vec![0usize];
    let pool = if opts.jobs > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .ok()
    } else {
        None
    };
    let mut depth = 0;
    while !frontier.is_empty() {
        let expand = |i: &usize| sys.successors(&g.nodes[*i]);
        let succs: Vec<Result<Vec<Step>, ModelError>> = match &pool {
            Some(p) => p.install(|| frontier.par_iter().map(expand).collect()),
            None => frontier.iter().map(expand).collect(),
        };
        let mut next = Vec::new();
        for (&i, steps) in frontier.iter().zip(succs) {
            let steps = steps?;
            if depth >= opts.max_steps {
                g.cut[i] = !steps.is_empty();
                continue;
            }
            for s in steps {
                let e = g.edges[i].len();
                let (j, fresh) = g.add(s.target, depth + 1, Some((i, e)));
                if fresh {
                    next.push(j);
                }
                g.edges[i].push(Edge {
                    thread: s.thread,
                    label: s.label,
                    component: s.component,
                    action: s.action,
                    target: j,
                });
            }
        }
        frontier = next;
        depth += 1;
    }
    Ok(g)
}

/// Observed registers of a terminal configuration, keyed by register name.
pub type Outcome = BTreeMap<String, Value>;

#[derive(Clone, Debug)]
pub struct ExploreResult {
    pub graph: StateGraph,
    /// Terminal outcomes with the first node exhibiting each.
    pub outcomes: BTreeMap<Outcome, usize>,
    /// Non-terminal nodes without successors (e.g. a thread blocked forever).
    pub deadlocks: Vec<usize>,
    pub truncated: bool,
}

impl ExploreResult {
    pub fn states(&self) -> usize {
        self.graph.len()
    }

    /// Terminal nodes.
    pub fn terminals(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.graph.len()).filter(|i| self.graph.nodes[*i].is_terminal())
    }
}

/// Project `cfg` onto the observed registers.
pub fn outcome_of(cfg: &Configuration, observe: &[(ThreadId, Reg)]) -> Outcome {
    observe
        .iter()
        .map(|(t, r)| (r.to_string(), cfg.local(*t, r).unwrap_or(Value::Bot)))
        .collect()
}

/// Explore and collect terminal outcomes over `observe`.
pub fn explore(
    sys: &System,
    init: &Configuration,
    observe: &[(ThreadId, Reg)],
    opts: ExploreOptions,
) -> Result<ExploreResult, ModelError> {
    let graph = build_graph(sys, init, opts)?;
    let mut outcomes = BTreeMap::new();
    let mut deadlocks = Vec::new();
    for (i, cfg) in graph.nodes.iter().enumerate() {
        if cfg.is_terminal() {
            outcomes.entry(outcome_of(cfg, observe)).or_insert(i);
        } else if graph.edges[i].is_empty() && !graph.cut[i] && graph.depth[i] < opts.max_steps {
            deadlocks.push(i);
        }
    }
    let truncated = graph.truncated();
    Ok(ExploreResult {
        graph,
        outcomes,
        deadlocks,
        truncated,
    })
}

/// Breadth-first search for the first reachable configuration satisfying
/// `pred`, without building the whole graph.
pub fn find_reachable(
    sys: &System,
    init: &Configuration,
    max_steps: usize,
    pred: impl Fn(&Configuration) -> bool,
) -> Result<Option<Vec<WitnessStep>>, ModelError> {
    let mut seen: HashMap<Configuration, (Option<Configuration>, Option<WitnessStep>)> = HashMap::new();
    let mut queue = VecDeque::new();
    seen.insert(init.clone(), (None, None));
    queue.push_back((init.clone(), 0));
    while let Some((cfg, d)) = queue.pop_front() {
        if pred(&cfg) {
            let mut path = Vec::new();
            let mut cur = cfg;
            while let (Some(p), Some(w)) = seen[&cur].clone() {
                path.push(w);
                cur = p;
            }
            path.reverse();
            return Ok(Some(path));
        }
        if d >= max_steps {
            continue;
        }
        for s in sys.successors(&cfg)? {
            if !seen.contains_key(&s.target) {
                let w = WitnessStep {
                    thread: s.thread,
                    label: s.label,
                };
                seen.insert(s.target.clone(), (Some(cfg.clone()), Some(w)));
                queue.push_back((s.target, d + 1));
            }
        }
    }
    Ok(None)
}
