//! The proof rules for abstract lock calls, checked as Hoare triples over
//! every lock step of a reachable state graph.
//!
//! Each rule is a family of triples `{p} l.m(v)_t {q}` indexed by a version
//! `u`, threads `t ≠ t'`, a client variable `x` and a value. A rule holds on a
//! graph when, for every edge performing the rule's statement and every
//! instantiation, `p` at the source implies `q` at the target. Every rule also
//! has a deliberately wrong variant, used to make sure the harness can fail.
//!
//! Version `0` in `release_u` stands for the initialisation, which plays the
//! role of the release preceding the first acquire.

use std::collections::BTreeSet;
use std::fmt;

use crate::action::Action;
use crate::assertion::{eval_assertion, Assertion, Atom, ObjAtom, ObjOp, Target};
use crate::error::ModelError;
use crate::explore::{Configuration, Edge, StateGraph, WitnessStep};
use crate::program::{BinOp, Expr};
use crate::types::{ThreadId, Value, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rule {
    /// `{cvv[release_u]} acquire(v)_t {v > u + 1}`
    AcquireAfterHidden,
    /// `{cvv[release_u]} m(v)_t {cvv[release_u]}`
    HiddenStable,
    /// `{[release_u]_t} acquire(v)_t {[acquire_(u+1)]_t}`
    DefiniteAcquire,
    /// `{[x = n]_t} m(v)_t' {[x = n]_t}`
    DefiniteStable,
    /// `{⟨release_u⟩[x = n]_t} acquire(v)_t {v = u + 1 ⇒ [x = n]_t}`
    ConditionalTransfer,
    /// `{¬⟨release_u⟩_t' ∧ [x = n]_t} release(u)_t {⟨release_u⟩[x = n]_t'}`
    ConditionalIntro,
}

impl Rule {
    pub const ALL: [Rule; 6] = [
        Rule::AcquireAfterHidden,
        Rule::HiddenStable,
        Rule::DefiniteAcquire,
        Rule::DefiniteStable,
        Rule::ConditionalTransfer,
        Rule::ConditionalIntro,
    ];

    /// 1-based position in the rule list.
    pub fn number(self) -> usize {
        Rule::ALL.iter().position(|r| *r == self).unwrap() + 1
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rule ({})", self.number())
    }
}

#[derive(Clone, Debug)]
pub struct RuleViolation {
    pub rule: Rule,
    /// Instantiated precondition and postcondition.
    pub triple: String,
    /// Path to the source state followed by the offending step.
    pub witness: Vec<WitnessStep>,
}

#[derive(Clone, Debug)]
pub struct RuleReport {
    pub rule: Rule,
    pub mutated: bool,
    /// Instances whose precondition held at the step's source.
    pub instances: usize,
    pub violations: Vec<RuleViolation>,
}

impl RuleReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

fn lit(n: i64) -> Expr {
    Expr::Lit(Value::Int(n))
}

fn release(lock: &Var, u: i64) -> ObjAtom {
    ObjAtom {
        object: lock.clone(),
        op: if u == 0 { ObjOp::Init } else { ObjOp::Release(lit(u)) },
    }
}

fn acquire(lock: &Var, v: i64) -> ObjAtom {
    ObjAtom {
        object: lock.clone(),
        op: ObjOp::Acquire(lit(v)),
    }
}

fn definite(t: ThreadId, target: Target) -> Assertion {
    Assertion::Atom(Atom::Definite {
        thread: t,
        target,
        comp: None,
    })
}

fn var_is(x: &Var, n: Value) -> Target {
    Target::Var(x.clone(), Expr::Lit(n))
}

fn cross(t: ThreadId, o: ObjAtom, x: &Var, n: Value) -> Assertion {
    Assertion::Atom(Atom::CrossConditional {
        thread: t,
        obj: o,
        y: x.clone(),
        v: Expr::Lit(n),
    })
}

/// The lock step an edge performs: `(is_acquire, version)`.
fn lock_step(e: &Edge, lock: &Var) -> Option<(bool, i64)> {
    match &e.action {
        Some(Action::LockAcquire { lock: l, version, .. }) if l == lock => Some((true, *version as i64)),
        Some(Action::LockRelease { lock: l, version }) if l == lock => Some((false, *version as i64)),
        _ => None,
    }
}

/// Instantiation domains drawn from the graph.
struct Domains {
    threads: Vec<ThreadId>,
    versions: Vec<i64>,
    vars: Vec<Var>,
    values: Vec<Value>,
}

fn domains(g: &StateGraph, lock: &Var) -> Domains {
    let mut versions = BTreeSet::from([0]);
    let mut values = BTreeSet::new();
    let mut vars = BTreeSet::new();
    for cfg in &g.nodes {
        for (_, a) in cfg.library.ops_on(lock) {
            if let Action::LockAcquire { version, .. } | Action::LockRelease { version, .. } = a {
                versions.insert(*version as i64);
            }
        }
        for x in cfg.client.vars() {
            vars.insert(x.clone());
            for (_, a) in cfg.client.ops_on(x) {
                values.extend(a.wrval());
            }
        }
    }
    let top = versions.iter().max().copied().unwrap_or(0);
    versions.insert(top + 1);
    Domains {
        threads: g.nodes.first().map(|c| c.threads().collect()).unwrap_or_default(),
        versions: versions.into_iter().collect(),
        vars: vars.into_iter().collect(),
        values: values.into_iter().collect(),
    }
}

/// One instantiated triple `(pre, post)` for an edge.
type Triple = (Assertion, Assertion);

fn instances(rule: Rule, mutated: bool, e: &Edge, lock: &Var, d: &Domains) -> Vec<Triple> {
    let t = e.thread;
    let step = lock_step(e, lock);
    let others: Vec<ThreadId> = d.threads.iter().copied().filter(|o| *o != t).collect();
    let mut out = Vec::new();
    match rule {
        Rule::AcquireAfterHidden => {
            if let Some((true, v)) = step {
                for &u in &d.versions {
                    let bound = if mutated { u + 3 } else { u + 1 };
                    out.push((
                        Assertion::Atom(Atom::Hidden(release(lock, u))),
                        Assertion::Atom(Atom::Pred(Expr::bin(BinOp::Gt, lit(v), lit(bound)))),
                    ));
                }
            }
        }
        Rule::HiddenStable => {
            if step.is_some() {
                for &u in &d.versions {
                    let post = if mutated {
                        Assertion::Atom(Atom::Possible {
                            thread: t,
                            target: Target::Obj(release(lock, u)),
                            comp: None,
                        })
                    } else {
                        Assertion::Atom(Atom::Hidden(release(lock, u)))
                    };
                    out.push((Assertion::Atom(Atom::Hidden(release(lock, u))), post));
                }
            }
        }
        Rule::DefiniteAcquire => {
            if let Some((true, _)) = step {
                for &u in &d.versions {
                    let pre = definite(t, Target::Obj(release(lock, u)));
                    if mutated {
                        for &o in &others {
                            out.push((pre.clone(), definite(o, Target::Obj(acquire(lock, u + 1)))));
                        }
                    } else {
                        out.push((pre, definite(t, Target::Obj(acquire(lock, u + 1)))));
                    }
                }
            }
        }
        Rule::DefiniteStable => {
            // the statement is a lock call by another thread; the mutant also
            // admits that thread's client steps
            if step.is_some() || mutated {
                for &o in &others {
                    for x in &d.vars {
                        for &n in &d.values {
                            let a = definite(o, var_is(x, n));
                            out.push((a.clone(), a));
                        }
                    }
                }
            }
        }
        Rule::ConditionalTransfer => {
            if let Some((true, v)) = step {
                for &u in &d.versions {
                    for x in &d.vars {
                        for &n in &d.values {
                            let got = definite(t, var_is(x, n));
                            let post = if mutated || v == u + 1 { got } else { Assertion::Bool(true) };
                            out.push((cross(t, release(lock, u), x, n), post));
                        }
                    }
                }
            }
        }
        Rule::ConditionalIntro => {
            if let Some((false, u)) = step {
                for &o in &others {
                    for x in &d.vars {
                        for &n in &d.values {
                            let pre = Assertion::And(vec![
                                Assertion::not(Assertion::Atom(Atom::Possible {
                                    thread: o,
                                    target: Target::Obj(release(lock, u)),
                                    comp: None,
                                })),
                                definite(t, var_is(x, n)),
                            ]);
                            let post = if mutated {
                                definite(o, var_is(x, n))
                            } else {
                                cross(o, release(lock, u), x, n)
                            };
                            out.push((pre, post));
                        }
                    }
                }
            }
        }
    }
    out
}

/// Check `rule` (or its mutant) on every edge of `g`.
pub fn check_rule(g: &StateGraph, lock: &Var, rule: Rule, mutated: bool) -> Result<RuleReport, ModelError> {
    let d = domains(g, lock);
    let mut report = RuleReport {
        rule,
        mutated,
        instances: 0,
        violations: vec![],
    };
    let eval = |a: &Assertion, c: &Configuration| eval_assertion(a, c);
    for (i, edges) in g.edges.iter().enumerate() {
        for (k, e) in edges.iter().enumerate() {
            for (pre, post) in instances(rule, mutated, e, lock, &d) {
                if !eval(&pre, &g.nodes[i])? {
                    continue;
                }
                report.instances += 1;
                if !eval(&post, &g.nodes[e.target])? {
                    report.violations.push(RuleViolation {
                        rule,
                        triple: format!("{{{pre}}} {} {{{post}}}", e.label),
                        witness: g.path_via(i, k),
                    });
                }
            }
        }
    }
    Ok(report)
}

/// All six rules, unmutated.
pub fn check_lock_rules(g: &StateGraph, lock: &Var) -> Result<Vec<RuleReport>, ModelError> {
    Rule::ALL.iter().map(|r| check_rule(g, lock, *r, false)).collect()
}
