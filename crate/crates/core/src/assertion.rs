//! Observability assertions and their evaluation over configurations.
//!
//! Variable atoms read whichever component owns the variable unless an
//! explicit component is given; object atoms read the component holding the
//! object's ops. Register expressions see every thread's registers (register
//! names are thread-local and disjoint) plus quantifier bindings.

use std::fmt;

use crate::action::Action;
use crate::error::ModelError;
use crate::explore::Configuration;
use crate::objects::is_sync;
use crate::program::{eval_expr, Expr, LocalState};
use crate::state::{ComponentState, View};
use crate::types::{Component, Reg, ThreadId, Value, Var};

/// A method instance `o.m` as it appears in assertions.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum ObjOp {
    Init,
    Acquire(Expr),
    Release(Expr),
    Enq(Expr),
    Deq(Expr),
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct ObjAtom {
    pub object: Var,
    pub op: ObjOp,
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Target {
    /// `x = u`
    Var(Var, Expr),
    /// `o.m`
    Obj(ObjAtom),
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Atom {
    /// `⟨x = u⟩_t` / `⟨o.m⟩_t`
    Possible {
        thread: ThreadId,
        target: Target,
        comp: Option<Component>,
    },
    /// `[x = u]_t` / `[o.m]_t`
    Definite {
        thread: ThreadId,
        target: Target,
        comp: Option<Component>,
    },
    /// `⟨x = u⟩[y = v]_t`, within one component.
    Conditional {
        thread: ThreadId,
        x: Var,
        u: Expr,
        y: Var,
        v: Expr,
        comp: Option<Component>,
    },
    /// `⟨o.m⟩^L[y = v]^C_t`
    CrossConditional {
        thread: ThreadId,
        obj: ObjAtom,
        y: Var,
        v: Expr,
    },
    /// `cvd[o.m]`
    Covered(ObjAtom),
    /// `cvv[o.m]`
    Hidden(ObjAtom),
    /// `pc_t ∈ labels`
    Pc { thread: ThreadId, labels: Vec<u32> },
    /// Boolean expression over registers and bound names.
    Pred(Expr),
    /// `e ∈ {e1, …}`
    In(Expr, Vec<Expr>),
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Assertion {
    Bool(bool),
    Atom(Atom),
    Not(Box<Assertion>),
    And(Vec<Assertion>),
    Or(Vec<Assertion>),
    Implies(Box<Assertion>, Box<Assertion>),
    Forall(Reg, Vec<Value>, Box<Assertion>),
    Exists(Reg, Vec<Value>, Box<Assertion>),
}

impl Assertion {
    pub fn atom(a: Atom) -> Self {
        Assertion::Atom(a)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(a: Assertion) -> Self {
        Assertion::Not(Box::new(a))
    }

    pub fn implies(a: Assertion, b: Assertion) -> Self {
        Assertion::Implies(Box::new(a), Box::new(b))
    }

    pub fn and(parts: Vec<Assertion>) -> Self {
        Assertion::And(parts)
    }
}

/// `dview(view, W, y) = v`: the view sits on the last write to `y` among
/// `ops`, and that write wrote `v`.
pub fn dview(view: &View, ops: &ComponentState, y: &Var, v: Value) -> bool {
    match (ops.last_write(y), view.get(y)) {
        (Some(lw), Some(ts)) => ts == lw.ts && lw.action.wrval() == Some(v),
        _ => false,
    }
}

fn op_matches(op: &ObjOp, a: &Action, env: &LocalState) -> Result<bool, ModelError> {
    let val = |e: &Expr| eval_expr(e, env);
    let ver = |e: &Expr| -> Result<Option<u32>, ModelError> {
        Ok(val(e)?.as_int().and_then(|n| u32::try_from(n).ok()))
    };
    Ok(match (op, a) {
        (ObjOp::Init, Action::LockInit { .. } | Action::QueueInit { .. }) => true,
        (ObjOp::Acquire(n), Action::LockAcquire { version, .. }) => ver(n)? == Some(*version),
        (ObjOp::Release(n), Action::LockRelease { version, .. }) => ver(n)? == Some(*version),
        (ObjOp::Enq(u), Action::Enqueue { value, .. }) => val(u)? == *value,
        (ObjOp::Deq(u), Action::Dequeue { value, .. }) => val(u)? == *value,
        _ => false,
    })
}

fn obj_state<'a>(cfg: &'a Configuration, o: &Var) -> &'a ComponentState {
    if cfg.client.has_var(o) {
        &cfg.client
    } else {
        &cfg.library
    }
}

fn var_state<'a>(cfg: &'a Configuration, x: &Var, comp: Option<Component>) -> &'a ComponentState {
    match comp {
        Some(c) => cfg.state(c),
        None => obj_state(cfg, x),
    }
}

/// Evaluation context: the configuration plus bindings for register names.
struct Env<'a> {
    cfg: &'a Configuration,
    regs: LocalState,
}

impl<'a> Env<'a> {
    fn new(cfg: &'a Configuration) -> Self {
        let mut regs = LocalState(Default::default());
        for ls in cfg.locals.values() {
            for (r, v) in &ls.0 {
                if !r.is_rval() {
                    regs.set(r.clone(), *v);
                }
            }
        }
        Env { cfg, regs }
    }

    /// Unbound registers read as ⊥.
    fn eval(&self, e: &Expr) -> Result<Value, ModelError> {
        let mut missing = std::collections::BTreeSet::new();
        e.registers(&mut missing);
        if missing.iter().all(|r| self.regs.get(r).is_some()) {
            return eval_expr(e, &self.regs);
        }
        let mut regs = self.regs.clone();
        for r in missing {
            if regs.get(&r).is_none() {
                regs.set(r, Value::Bot);
            }
        }
        eval_expr(e, &regs)
    }

    fn eval_atom(&self, a: &Atom) -> Result<bool, ModelError> {
        let cfg = self.cfg;
        Ok(match a {
            Atom::Possible { thread, target, comp } => match target {
                Target::Var(x, u) => {
                    let u = self.eval(u)?;
                    let s = var_state(cfg, x, *comp);
                    match s.observable_ops(*thread, x) {
                        Ok(obs) => obs.iter().any(|w| w.action.wrval() == Some(u)),
                        Err(_) => false,
                    }
                }
                Target::Obj(o) => {
                    let s = var_state(cfg, &o.object, *comp);
                    let Some(front) = s.view_of(*thread, &o.object) else {
                        return Ok(false);
                    };
                    let mut any = false;
                    for (ts, act) in s.ops_on(&o.object) {
                        if *ts >= front && op_matches(&o.op, act, &self.regs)? {
                            any = true;
                        }
                    }
                    any
                }
            },
            Atom::Definite { thread, target, comp } => match target {
                Target::Var(x, u) => {
                    let u = self.eval(u)?;
                    let s = var_state(cfg, x, *comp);
                    dview(&s.thread_view(*thread), s, x, u)
                }
                Target::Obj(o) => {
                    let s = var_state(cfg, &o.object, *comp);
                    match (s.max_op(&o.object), s.view_of(*thread, &o.object)) {
                        (Some(m), Some(front)) => front == m.ts && op_matches(&o.op, &m.action, &self.regs)?,
                        _ => false,
                    }
                }
            },
            Atom::Conditional {
                thread,
                x,
                u,
                y,
                v,
                comp,
            } => {
                let (u, v) = (self.eval(u)?, self.eval(v)?);
                let s = var_state(cfg, x, *comp);
                match s.observable_ops(*thread, x) {
                    Ok(obs) => obs.iter().filter(|w| w.action.wrval() == Some(u)).all(|w| {
                        w.action.is_releasing_write() && dview(&s.mview[&w.op_ref()], s, y, v)
                    }),
                    Err(_) => true,
                }
            }
            Atom::CrossConditional { thread, obj, y, v } => {
                let v = self.eval(v)?;
                let lib = &cfg.library;
                let Some(front) = lib.view_of(*thread, &obj.object) else {
                    return Ok(false);
                };
                let mut sync = None;
                let mut ok = true;
                for (ts, act) in lib.ops_on(&obj.object) {
                    if op_matches(&obj.op, act, &self.regs)? {
                        sync = Some(is_sync(act));
                        if *ts >= front {
                            let mv = &lib.mview[&crate::state::OpRef::new(obj.object.clone(), *ts)];
                            ok &= dview(mv, &cfg.client, y, v);
                        }
                    }
                }
                // membership in Sync is a property of the method, not of an instance
                let in_sync = sync.unwrap_or_else(|| !matches!(obj.op, ObjOp::Init) && !self.is_empty_deq(&obj.op));
                in_sync && ok
            }
            Atom::Covered(o) => {
                let s = obj_state(cfg, &o.object);
                let max = s.max_ts(&o.object).ok();
                let mut ok = true;
                for (ts, act) in s.ops_on(&o.object) {
                    if !s.is_covered(&o.object, *ts) {
                        ok &= op_matches(&o.op, act, &self.regs)? && Some(*ts) == max;
                    }
                }
                ok
            }
            Atom::Hidden(o) => {
                let s = obj_state(cfg, &o.object);
                let mut exists = false;
                let mut all = true;
                for (ts, act) in s.ops_on(&o.object) {
                    if op_matches(&o.op, act, &self.regs)? {
                        exists = true;
                        all &= s.is_covered(&o.object, *ts);
                    }
                }
                exists && all
            }
            Atom::Pc { thread, labels } => cfg.pc(*thread).is_some_and(|l| labels.contains(&l)),
            Atom::Pred(e) => self
                .eval(e)?
                .as_bool()
                .ok_or_else(|| ModelError::Type(format!("assertion `{e}` is not boolean")))?,
            Atom::In(e, set) => {
                let v = self.eval(e)?;
                let mut found = false;
                for s in set {
                    found |= self.eval(s)? == v;
                }
                found
            }
        })
    }

    fn is_empty_deq(&self, op: &ObjOp) -> bool {
        matches!(op, ObjOp::Deq(e) if self.eval(e) == Ok(Value::Empty))
    }

    fn eval_assertion(&mut self, a: &Assertion) -> Result<bool, ModelError> {
        Ok(match a {
            Assertion::Bool(b) => *b,
            Assertion::Atom(at) => self.eval_atom(at)?,
            Assertion::Not(a) => !self.eval_assertion(a)?,
            Assertion::And(parts) => {
                for p in parts {
                    if !self.eval_assertion(p)? {
                        return Ok(false);
                    }
                }
                true
            }
            Assertion::Or(parts) => {
                for p in parts {
                    if self.eval_assertion(p)? {
                        return Ok(true);
                    }
                }
                false
            }
            Assertion::Implies(a, b) => !self.eval_assertion(a)? || self.eval_assertion(b)?,
            Assertion::Forall(r, vals, body) | Assertion::Exists(r, vals, body) => {
                let universal = matches!(a, Assertion::Forall(..));
                let saved = self.regs.get(r);
                let mut result = universal;
                for v in vals {
                    self.regs.set(r.clone(), *v);
                    let b = self.eval_assertion(body)?;
                    if b != universal {
                        result = b;
                        break;
                    }
                }
                match saved {
                    Some(v) => self.regs.set(r.clone(), v),
                    None => {
                        self.regs.0.remove(r);
                    }
                }
                result
            }
        })
    }
}

/// Evaluate `a` in `cfg`.
pub fn eval_assertion(a: &Assertion, cfg: &Configuration) -> Result<bool, ModelError> {
    Env::new(cfg).eval_assertion(a)
}

/// Evaluate a single atom in `cfg`.
pub fn eval_atom(a: &Atom, cfg: &Configuration) -> Result<bool, ModelError> {
    Env::new(cfg).eval_atom(a)
}

impl fmt::Display for ObjAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ver = |e: &Expr| match e {
            Expr::Lit(v) => v.to_string(),
            Expr::Reg(r) => r.to_string(),
            e => format!("({e})"),
        };
        match &self.op {
            ObjOp::Init => write!(f, "{}.init", self.object),
            ObjOp::Acquire(n) => write!(f, "{}.acquire_{}", self.object, ver(n)),
            ObjOp::Release(n) => write!(f, "{}.release_{}", self.object, ver(n)),
            ObjOp::Enq(u) => write!(f, "{}.enq({u})", self.object),
            ObjOp::Deq(u) => write!(f, "{}.deq({u})", self.object),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Var(x, u) => write!(f, "{x} = {u}"),
            Target::Obj(o) => write!(f, "{o}"),
        }
    }
}

fn comp_suffix(c: &Option<Component>) -> &'static str {
    match c {
        None => "",
        Some(Component::Client) => "@C",
        Some(Component::Library) => "@L",
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Possible { thread, target, comp } => write!(f, "pobs({thread}, {target}){}", comp_suffix(comp)),
            Atom::Definite { thread, target, comp } => write!(f, "dobs({thread}, {target}){}", comp_suffix(comp)),
            Atom::Conditional {
                thread,
                x,
                u,
                y,
                v,
                comp,
            } => write!(f, "cond({thread}, {x} = {u}, {y} = {v}){}", comp_suffix(comp)),
            Atom::CrossConditional { thread, obj, y, v } => write!(f, "cond({thread}, {obj}, {y} = {v})"),
            Atom::Covered(o) => write!(f, "cvd({o})"),
            Atom::Hidden(o) => write!(f, "cvv({o})"),
            Atom::Pc { thread, labels } => {
                if labels.len() == 1 {
                    write!(f, "pc({thread}) = {}", labels[0])
                } else {
                    let ls: Vec<String> = labels.iter().map(|l| l.to_string()).collect();
                    write!(f, "pc({thread}) in {{{}}}", ls.join(", "))
                }
            }
            Atom::Pred(e) => write!(f, "{e}"),
            Atom::In(e, set) => {
                let vs: Vec<String> = set.iter().map(|v| v.to_string()).collect();
                write!(f, "{e} in {{{}}}", vs.join(", "))
            }
        }
    }
}

impl fmt::Display for Assertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // precedence: => (1, right assoc) < || (2) < && (3) < ! (4)
        type Body<'a> = Box<dyn Fn(&mut fmt::Formatter<'_>) -> fmt::Result + 'a>;
        fn go(a: &Assertion, prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            let (p, body): (u8, Body<'_>) = match a {
                Assertion::Bool(b) => (5, Box::new(move |f| write!(f, "{b}"))),
                Assertion::Atom(at) => (5, Box::new(move |f| write!(f, "{at}"))),
                Assertion::Not(x) => (
                    4,
                    Box::new(move |f| {
                        f.write_str("!")?;
                        go(x, 4, f)
                    }),
                ),
                Assertion::And(ps) | Assertion::Or(ps) if ps.is_empty() => {
                    let b = matches!(a, Assertion::And(_));
                    (5, Box::new(move |f| write!(f, "{b}")))
                }
                Assertion::And(ps) | Assertion::Or(ps) => {
                    let (p, sep) = if matches!(a, Assertion::And(_)) { (3, " && ") } else { (2, " || ") };
                    (
                        p,
                        Box::new(move |f| {
                            for (i, x) in ps.iter().enumerate() {
                                if i > 0 {
                                    f.write_str(sep)?;
                                }
                                go(x, p + 1, f)?;
                            }
                            Ok(())
                        }),
                    )
                }
                Assertion::Implies(x, y) => (
                    1,
                    Box::new(move |f| {
                        go(x, 2, f)?;
                        f.write_str(" => ")?;
                        go(y, 1, f)
                    }),
                ),
                Assertion::Forall(r, vs, b) | Assertion::Exists(r, vs, b) => {
                    let q = if matches!(a, Assertion::Forall(..)) { "forall" } else { "exists" };
                    (
                        0,
                        Box::new(move |f| {
                            let vs: Vec<String> = vs.iter().map(|v| v.to_string()).collect();
                            write!(f, "{q} {r} in {{{}}} . ", vs.join(", "))?;
                            go(b, 0, f)
                        }),
                    )
                }
            };
            if p < prec {
                f.write_str("(")?;
                body(f)?;
                f.write_str(")")
            } else {
                body(f)
            }
        }
        go(self, 0, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explore::System;
    use crate::objects::ObjectSpec;
    use crate::program::{CExp, Call, Hole, Method};
    use crate::state::{InitSpec, ObjectKind};
    use crate::Cmd;
    use std::collections::BTreeMap;

    const T1: ThreadId = ThreadId(1);
    const T2: ThreadId = ThreadId(2);

    fn v(s: &str) -> Var {
        Var::new(s)
    }

    fn lit(n: i64) -> Expr {
        Expr::lit(n)
    }

    fn obj(op: ObjOp) -> ObjAtom {
        ObjAtom { object: v("l"), op }
    }

    fn possible(t: ThreadId, x: &str, u: i64) -> Assertion {
        Assertion::Atom(Atom::Possible {
            thread: t,
            target: Target::Var(v(x), lit(u)),
            comp: None,
        })
    }

    fn definite(t: ThreadId, x: &str, u: i64) -> Assertion {
        Assertion::Atom(Atom::Definite {
            thread: t,
            target: Target::Var(v(x), lit(u)),
            comp: None,
        })
    }

    fn call(m: Method) -> Cmd {
        Cmd::Call(Hole::Call(Call {
            object: v("l"),
            method: m,
            arg: None,
            version_out: None,
        }))
    }

    fn write(x: &str, n: i64) -> Cmd {
        Cmd::Write {
            var: v(x),
            expr: lit(n),
            release: false,
        }
    }

    /// t1: acquire; d := 5; release    t2: skip
    fn lock_system() -> (System, Configuration) {
        let sys = System::new(vec![ObjectSpec::lock("l")]);
        let spec = InitSpec {
            globals: vec![(v("d"), Value::Int(0))],
            object: Some((v("l"), ObjectKind::Lock)),
            threads: vec![T1, T2],
            ..Default::default()
        };
        let mut progs = BTreeMap::new();
        progs.insert(
            T1,
            Cmd::seq_all(vec![call(Method::Acquire), write("d", 5), call(Method::Release)]),
        );
        progs.insert(
            T2,
            Cmd::Assign {
                reg: Reg::new("r"),
                rhs: CExp::Expr(lit(0)),
            },
        );
        let init = sys.initial(&spec, progs, &BTreeMap::new()).unwrap();
        (sys, init)
    }

    fn run(sys: &System, cfg: &Configuration, t: ThreadId) -> Configuration {
        let mut out = Vec::new();
        sys.thread_successors(cfg, t, &mut out).unwrap();
        assert_eq!(out.len(), 1, "{out:?}");
        out.pop().unwrap().target
    }

    #[test]
    fn observation_atoms_at_init() {
        let (_, init) = lock_system();
        assert!(eval_assertion(&possible(T1, "d", 0), &init).unwrap());
        assert!(!eval_assertion(&possible(T1, "d", 5), &init).unwrap());
        assert!(eval_assertion(&definite(T2, "d", 0), &init).unwrap());
        let d_init = Assertion::Atom(Atom::Definite {
            thread: T1,
            target: Target::Obj(obj(ObjOp::Init)),
            comp: None,
        });
        assert!(eval_assertion(&d_init, &init).unwrap());
        // covered: the lone uncovered op is the max init op
        assert!(eval_atom(&Atom::Covered(obj(ObjOp::Init)), &init).unwrap());
        assert!(!eval_atom(&Atom::Hidden(obj(ObjOp::Init)), &init).unwrap());
        assert!(!eval_atom(&Atom::Hidden(obj(ObjOp::Release(lit(4)))), &init).unwrap());
        assert!(eval_assertion(&Assertion::Bool(true), &init).unwrap());
        let conj = Assertion::And(vec![Assertion::Bool(true), possible(T1, "d", 5)]);
        assert!(!eval_assertion(&conj, &init).unwrap());
    }

    #[test]
    fn definite_after_write() {
        let (sys, init) = lock_system();
        let c = run(&sys, &init, T1); // acquire
        assert!(eval_atom(&Atom::Covered(obj(ObjOp::Acquire(lit(1)))), &c).unwrap());
        assert!(eval_atom(&Atom::Hidden(obj(ObjOp::Init)), &c).unwrap());
        let c = run(&sys, &c, T1); // d := 5
        assert!(eval_assertion(&definite(T1, "d", 5), &c).unwrap());
        assert!(!eval_assertion(&definite(T2, "d", 5), &c).unwrap());
        assert!(eval_assertion(&possible(T2, "d", 5), &c).unwrap());
        let c = run(&sys, &c, T1); // release
        let cross = Atom::CrossConditional {
            thread: T2,
            obj: obj(ObjOp::Release(lit(2))),
            y: v("d"),
            v: lit(5),
        };
        assert!(eval_atom(&cross, &c).unwrap());
        let pobs_rel = Atom::Possible {
            thread: T2,
            target: Target::Obj(obj(ObjOp::Release(lit(2)))),
            comp: None,
        };
        assert!(eval_atom(&pobs_rel, &c).unwrap());
    }

    #[test]
    fn conditional_vacuous_without_writes() {
        let (_, init) = lock_system();
        let a = Atom::Conditional {
            thread: T2,
            x: v("d"),
            u: lit(7),
            y: v("d"),
            v: lit(0),
            comp: None,
        };
        assert!(eval_atom(&a, &init).unwrap());
        // the init write is not releasing
        let b = Atom::Conditional {
            thread: T2,
            x: v("d"),
            u: lit(0),
            y: v("d"),
            v: lit(0),
            comp: None,
        };
        assert!(!eval_atom(&b, &init).unwrap());
    }

    #[test]
    fn quantifiers_and_pc() {
        let (_, init) = lock_system();
        let all = Assertion::Forall(
            Reg::new("u"),
            vec![Value::Int(0), Value::Int(5)],
            Box::new(Assertion::implies(
                Assertion::Atom(Atom::Pred(Expr::bin(crate::program::BinOp::Eq, Expr::reg("u"), lit(0)))),
                Assertion::Atom(Atom::Possible {
                    thread: T1,
                    target: Target::Var(v("d"), Expr::reg("u")),
                    comp: None,
                }),
            )),
        );
        assert!(eval_assertion(&all, &init).unwrap());
        let some = Assertion::Exists(
            Reg::new("u"),
            vec![Value::Int(3), Value::Int(5)],
            Box::new(Assertion::Atom(Atom::Possible {
                thread: T1,
                target: Target::Var(v("d"), Expr::reg("u")),
                comp: None,
            })),
        );
        assert!(!eval_assertion(&some, &init).unwrap());
        assert!(eval_atom(&Atom::Pc { thread: T1, labels: vec![] }, &init).is_ok());
    }

    #[test]
    fn display_round_shapes() {
        let a = Assertion::implies(
            Assertion::And(vec![possible(T1, "d", 0), Assertion::not(definite(T2, "d", 5))]),
            Assertion::Atom(Atom::Covered(obj(ObjOp::Acquire(lit(1))))),
        );
        assert_eq!(a.to_string(), "pobs(1, d = 0) && !dobs(2, d = 5) => cvd(l.acquire_1)");
    }
}
