//! Random programs, random walks and the invariants checked along them.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use rarobj_core::assertion::{eval_atom, Atom, Target};
use rarobj_core::explore::{canonical_key, Configuration, System};
use rarobj_core::litmus::parse_litmus;
use rarobj_core::memory::{mem_step, written_values};
use rarobj_core::state::{make_init_states, InitSpec};
use rarobj_core::{Action, ComponentState, Expr, ThreadId, Timestamp, Value, Var, View};

pub const VARS: [&str; 2] = ["x", "y"];

/// A random straight-line litmus program over `x` and `y`.
pub fn random_program(rng: &mut ChaCha8Rng) -> String {
    let threads = rng.gen_range(2..=3);
    let mut src = String::from("litmus \"random\"\ninit x := 0; y := 0;\n");
    for t in 1..=threads {
        src.push_str(&format!("thread {t}\n"));
        let n = rng.gen_range(2..=4);
        for i in 0..n {
            let x = VARS.choose(rng).unwrap();
            let r = format!("r{t}_{i}");
            let v = rng.gen_range(1..=2);
            let stmt = match rng.gen_range(0..6) {
                0 => format!("{x} := {v}"),
                1 => format!("{x} :=R {v}"),
                2 => format!("{r} <- {x}"),
                3 => format!("{r} <-A {x}"),
                4 => format!("{r} <- CAS({x}, {}, {v})", rng.gen_range(0..=1)),
                _ => format!("{r} <- FAI({x})"),
            };
            src.push_str(&format!("  {stmt};\n"));
        }
        src.push_str("  skip\nend\n");
    }
    src
}

/// Random walks over random programs, restarting at terminal or blocked
/// states, until `min_states` distinct states have been visited. The callback
/// sees each visited `(pre, post)` pair.
pub fn walk_programs(
    rng: &mut ChaCha8Rng,
    min_states: usize,
    mut visit: impl FnMut(&System, &Configuration, Option<&Configuration>),
) -> usize {
    let mut seen: HashSet<Configuration> = HashSet::new();
    while seen.len() < min_states {
        let f = parse_litmus(&random_program(rng)).expect("generated program parses");
        let m = f.model().expect("generated program builds");
        let mut cur = m.init.clone();
        visit(&m.system, &cur, None);
        seen.insert(cur.clone());
        for _ in 0..40 {
            let steps = m.system.successors(&cur).expect("no model error");
            let Some(s) = steps.choose(rng) else { break };
            visit(&m.system, &s.target, Some(&cur));
            seen.insert(s.target.clone());
            cur = s.target.clone();
        }
    }
    seen.len()
}

/// One raw memory transition: pre-state, post-state and the new op's var.
pub struct MemStep<'a> {
    pub pre: (&'a ComponentState, &'a ComponentState),
    pub post: (&'a ComponentState, &'a ComponentState),
    pub var: &'a Var,
    pub exec_is_client: bool,
    pub pred: Timestamp,
}

/// Random walks of bare memory transitions (no programs, no
/// normalisation), over client variables `x`, `y` and library variable `z`.
pub fn walk_memory(rng: &mut ChaCha8Rng, min_states: usize, mut visit: impl FnMut(&MemStep<'_>)) -> usize {
    let vars: Vec<Var> = ["x", "y", "z"].iter().map(|v| Var::new(v)).collect();
    let threads = [ThreadId(1), ThreadId(2), ThreadId(3)];
    let spec = InitSpec {
        globals: vars.iter().map(|x| (x.clone(), Value::Int(0))).collect(),
        library_vars: BTreeSet::from([Var::new("z")]),
        object: None,
        threads: threads.to_vec(),
    };
    let mut states = 0;
    while states < min_states {
        let init = make_init_states(&spec).unwrap();
        let (mut c, mut l) = (init.client, init.library);
        for _ in 0..30 {
            let x = vars.choose(rng).unwrap();
            let t = *threads.choose(rng).unwrap();
            let client = c.has_var(x);
            let (g, b) = if client { (&c, &l) } else { (&l, &c) };
            let dom = written_values(g, x);
            let a = match rng.gen_range(0..3) {
                0 => Action::Write {
                    var: x.clone(),
                    value: Value::Int(rng.gen_range(1..=3)),
                    release: rng.gen(),
                },
                1 => Action::Read {
                    var: x.clone(),
                    value: *dom.choose(rng).unwrap(),
                    acquire: rng.gen(),
                },
                _ => Action::Update {
                    var: x.clone(),
                    read: *dom.choose(rng).unwrap(),
                    write: Value::Int(rng.gen_range(1..=3)),
                },
            };
            let trs = mem_step(g, b, t, &a);
            let Some(tr) = trs.choose(rng) else { continue };
            let (nc, nl) = if client {
                (tr.exec.clone(), tr.ctx.clone())
            } else {
                (tr.ctx.clone(), tr.exec.clone())
            };
            visit(&MemStep {
                pre: (&c, &l),
                post: (&nc, &nl),
                var: x,
                exec_is_client: client,
                pred: tr.pred,
            });
            states += 1;
            c = nc;
            l = nl;
        }
    }
    states
}

// ---- invariants

/// A write or update got a timestamp not used before and adjacent to its
/// predecessor in the whole component.
pub fn fresh_insertion(s: &MemStep<'_>) -> bool {
    let (pre, post) = if s.exec_is_client {
        (s.pre.0, s.post.0)
    } else {
        (s.pre.1, s.post.1)
    };
    let before = pre.timestamps();
    let new: Vec<Timestamp> = post.timestamps().difference(&before).copied().collect();
    match new.as_slice() {
        [] => post.op_count() == pre.op_count(),
        [q] => pre.is_fresh(s.pred, *q) && post.op_count() == pre.op_count() + 1,
        _ => false,
    }
}

/// Every update immediately follows the op it read, which is covered, and
/// only updates cover.
pub fn updates_atomic(g: &ComponentState) -> bool {
    g.vars().all(|x| {
        let ops: Vec<(Timestamp, Action)> = g.ops_on(x).map(|(t, a)| (*t, a.clone())).collect();
        ops.iter().enumerate().all(|(i, (ts, a))| {
            let is_upd = matches!(a, Action::Update { .. });
            let pred_ok = !is_upd || (i > 0 && g.is_covered(x, ops[i - 1].0));
            let cover_ok = !g.is_covered(x, *ts) || matches!(ops.get(i + 1), Some((_, Action::Update { .. })));
            pred_ok && cover_ok
        })
    })
}

/// No thread's view of any variable moves backwards.
pub fn views_monotone(s: &MemStep<'_>) -> bool {
    let mono = |a: &ComponentState, b: &ComponentState| {
        a.tview.iter().all(|(t, v)| {
            let w = b.thread_view(*t);
            v.iter().all(|(x, ts)| w.get(x).is_some_and(|n| n >= *ts))
        })
    };
    mono(s.pre.0, s.post.0) && mono(s.pre.1, s.post.1)
}

/// `[x = v]_t` implies `⟨x = v⟩_t` for every thread, client variable and
/// written value.
pub fn definite_implies_possible(cfg: &Configuration) -> bool {
    cfg.threads().all(|t| {
        cfg.client.vars().all(|x| {
            written_values(&cfg.client, x).into_iter().all(|v| {
                let target = Target::Var(x.clone(), Expr::Lit(v));
                let d = Atom::Definite {
                    thread: t,
                    target: target.clone(),
                    comp: None,
                };
                let p = Atom::Possible {
                    thread: t,
                    target,
                    comp: None,
                };
                !eval_atom(&d, cfg).unwrap() || eval_atom(&p, cfg).unwrap()
            })
        })
    })
}

/// A random view over `x`, `y`, `z` with small rational timestamps.
pub fn random_view(rng: &mut ChaCha8Rng) -> View {
    let mut v = View::new();
    for x in ["x", "y", "z"] {
        if rng.gen_bool(0.7) {
            v.set(Var::new(x), Timestamp::new(rng.gen_range(0..12), rng.gen_range(1..4)));
        }
    }
    v
}

/// `v1 ⊗ v2` keeps the domain of `v1` and takes the later entry pointwise.
pub fn merge_is_pointwise_max(v1: &View, v2: &View) -> bool {
    let m = rarobj_core::merge_views(v1, v2);
    m.iter().count() == v1.iter().count()
        && v1.iter().all(|(x, t1)| {
            let want = v2.get(x).map_or(*t1, |t2| t2.max(*t1));
            m.get(x) == Some(want)
        })
}

/// A random strictly increasing renaming of `ts`.
pub fn random_monotone(rng: &mut ChaCha8Rng, ts: &BTreeSet<Timestamp>) -> BTreeMap<Timestamp, Timestamp> {
    let denom = rng.gen_range(1..6);
    let mut acc: i64 = rng.gen_range(-10..10);
    ts.iter()
        .map(|t| {
            acc += rng.gen_range(1..9);
            (*t, Timestamp::new(acc, denom))
        })
        .collect()
}

/// Renaming both components by independent increasing maps leaves the
/// canonical key unchanged.
pub fn canonical_key_invariant(rng: &mut ChaCha8Rng, cfg: &Configuration) -> bool {
    let fc = random_monotone(rng, &cfg.client.timestamps());
    let fl = random_monotone(rng, &cfg.library.timestamps());
    let mut renamed = cfg.clone();
    renamed.client = cfg.client.rename(&fc, &fl);
    renamed.library = cfg.library.rename(&fl, &fc);
    canonical_key(&renamed) == canonical_key(cfg)
}
