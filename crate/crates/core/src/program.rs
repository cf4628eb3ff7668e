//! Program syntax with holes and the thread-local small-step rules.
//!
//! Reads are emitted once per candidate value supplied by the caller's value
//! domain; the memory semantics later discards the values no observable write
//! provides. Abstract method calls are emitted as pending requests that the
//! object semantics resolves with [`resolve_call`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::action::Action;
use crate::error::ModelError;
use crate::types::{Component, Reg, Value, Var};

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum UnOp {
    Not,
    Neg,
    Even,
    Odd,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Eq => "=",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
            BinOp::Add | BinOp::Sub => 4,
            BinOp::Mul => 5,
        }
    }
}

/// Expressions over local registers only.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Expr {
    Lit(Value),
    Reg(Reg),
    Un(UnOp, Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn lit(v: impl Into<Value>) -> Expr {
        Expr::Lit(v.into())
    }

    pub fn reg(r: &str) -> Expr {
        Expr::Reg(Reg::new(r))
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: Expr) -> Expr {
        Expr::Un(UnOp::Not, Box::new(e))
    }

    pub fn registers(&self, out: &mut BTreeSet<Reg>) {
        match self {
            Expr::Lit(_) => {}
            Expr::Reg(r) => {
                out.insert(r.clone());
            }
            Expr::Un(_, e) => e.registers(out),
            Expr::Bin(_, a, b) => {
                a.registers(out);
                b.registers(out);
            }
        }
    }

    pub fn literals(&self, out: &mut BTreeSet<Value>) {
        match self {
            Expr::Lit(v) => {
                out.insert(*v);
            }
            Expr::Reg(_) => {}
            Expr::Un(_, e) => e.literals(out),
            Expr::Bin(_, a, b) => {
                a.literals(out);
                b.literals(out);
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(e: &Expr, prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            match e {
                Expr::Lit(v) => write!(f, "{v}"),
                Expr::Reg(r) => write!(f, "{r}"),
                Expr::Un(UnOp::Not, e) => {
                    f.write_str("!")?;
                    go(e, 6, f)
                }
                // `-3` reads back as a literal, so a negated literal keeps parentheses
                Expr::Un(UnOp::Neg, e) if matches!(**e, Expr::Lit(_)) => write!(f, "-({e})"),
                Expr::Un(UnOp::Neg, e) => {
                    f.write_str("-")?;
                    go(e, 6, f)
                }
                Expr::Un(UnOp::Even, e) => {
                    f.write_str("even(")?;
                    go(e, 0, f)?;
                    f.write_str(")")
                }
                Expr::Un(UnOp::Odd, e) => {
                    f.write_str("odd(")?;
                    go(e, 0, f)?;
                    f.write_str(")")
                }
                Expr::Bin(op, a, b) => {
                    let p = op.precedence();
                    if p < prec {
                        f.write_str("(")?;
                    }
                    go(a, p, f)?;
                    write!(f, " {} ", op.symbol())?;
                    // left associative: the right operand needs strictly tighter binding
                    go(b, p + 1, f)?;
                    if p < prec {
                        f.write_str(")")?;
                    }
                    Ok(())
                }
            }
        }
        go(self, 0, f)
    }
}

/// A thread's local state: register valuation, including `rval`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct LocalState(pub BTreeMap<Reg, Value>);

impl LocalState {
    /// Fresh local state with `rval = ⊥`.
    pub fn new() -> Self {
        let mut m = BTreeMap::new();
        m.insert(Reg::rval(), Value::Bot);
        LocalState(m)
    }

    pub fn get(&self, r: &Reg) -> Option<Value> {
        self.0.get(r).copied()
    }

    pub fn set(&mut self, r: Reg, v: Value) {
        self.0.insert(r, v);
    }

    pub fn with(mut self, r: &str, v: impl Into<Value>) -> Self {
        self.set(Reg::new(r), v.into());
        self
    }
}

impl Default for LocalState {
    fn default() -> Self {
        LocalState::new()
    }
}

fn type_err(what: &str, v: Value) -> ModelError {
    ModelError::Type(format!("expected {what}, found {v}"))
}

fn int(v: Value) -> Result<i64, ModelError> {
    v.as_int().ok_or_else(|| type_err("integer", v))
}

fn boolean(v: Value) -> Result<bool, ModelError> {
    v.as_bool().ok_or_else(|| type_err("boolean", v))
}

/// `⟦e⟧_ls`, strict evaluation.
pub fn eval_expr(e: &Expr, ls: &LocalState) -> Result<Value, ModelError> {
    Ok(match e {
        Expr::Lit(v) => *v,
        Expr::Reg(r) => ls.get(r).ok_or_else(|| ModelError::UnboundLocal(r.clone()))?,
        Expr::Un(op, e) => {
            let v = eval_expr(e, ls)?;
            match op {
                UnOp::Not => Value::Bool(!boolean(v)?),
                UnOp::Neg => Value::Int(-int(v)?),
                UnOp::Even => Value::Bool(int(v)? % 2 == 0),
                UnOp::Odd => Value::Bool(int(v)? % 2 != 0),
            }
        }
        Expr::Bin(op, a, b) => {
            let x = eval_expr(a, ls)?;
            let y = eval_expr(b, ls)?;
            match op {
                BinOp::Add => Value::Int(int(x)? + int(y)?),
                BinOp::Sub => Value::Int(int(x)? - int(y)?),
                BinOp::Mul => Value::Int(int(x)? * int(y)?),
                BinOp::Eq => Value::Bool(x == y),
                BinOp::Ne => Value::Bool(x != y),
                BinOp::Lt => Value::Bool(int(x)? < int(y)?),
                BinOp::Le => Value::Bool(int(x)? <= int(y)?),
                BinOp::Gt => Value::Bool(int(x)? > int(y)?),
                BinOp::Ge => Value::Bool(int(x)? >= int(y)?),
                BinOp::And => Value::Bool(boolean(x)? && boolean(y)?),
                BinOp::Or => Value::Bool(boolean(x)? || boolean(y)?),
            }
        }
    })
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Method {
    Acquire,
    Release,
    Enq,
    Deq,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Acquire => "acquire",
            Method::Release => "release",
            Method::Enq => "enq",
            Method::Deq => "deq",
        }
    }
}

/// `o.m([u])`. `version_out` is an auxiliary register receiving the lock
/// version assigned by the call (`l.Acquire(rl)`).
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Call {
    pub object: Var,
    pub method: Method,
    pub arg: Option<Expr>,
    pub version_out: Option<Reg>,
}

/// Implementation body placed in a hole; on termination the hole holds
/// `⟦ret⟧` and `rval` is set to it.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Body {
    pub cmd: Cmd,
    pub ret: Expr,
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Hole {
    /// `•`, unfilled.
    Empty,
    /// Abstract method call, executed atomically by the object semantics.
    Call(Call),
    /// A call whose request has been issued and awaits its result.
    Pending(Call),
    Body(Box<Body>),
    /// Finished; `Value(Bot)` is `C[⊥]`.
    Value(Value),
}

/// Right-hand side of an assignment or a branch condition: `CExp ::= • | Exp`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum CExp {
    Expr(Expr),
    Hole(Hole),
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Cmd {
    /// `⊥`
    Skip,
    Assign { reg: Reg, rhs: CExp },
    Write { var: Var, expr: Expr, release: bool },
    Read { reg: Reg, var: Var, acquire: bool },
    Cas { reg: Reg, var: Var, expected: Expr, new: Expr },
    Fai { reg: Reg, var: Var },
    /// Hole in statement position.
    Call(Hole),
    Seq(Box<Cmd>, Box<Cmd>),
    If { cond: CExp, then_: Box<Cmd>, else_: Box<Cmd> },
    While { cond: Expr, body: Box<Cmd> },
    DoUntil { body: Box<Cmd>, cond: Expr },
    /// Program point label; transparent to the semantics.
    Labelled(u32, Box<Cmd>),
}

impl Cmd {
    pub fn seq(a: Cmd, b: Cmd) -> Cmd {
        Cmd::Seq(Box::new(a), Box::new(b))
    }

    /// Right-nested sequence of `cmds`; `Skip` when empty.
    pub fn seq_all(cmds: Vec<Cmd>) -> Cmd {
        let mut it = cmds.into_iter().rev();
        match it.next() {
            None => Cmd::Skip,
            Some(last) => it.fold(last, |acc, c| Cmd::seq(c, acc)),
        }
    }

    /// `⊥` or a finished hole in statement position.
    fn is_value(&self) -> bool {
        matches!(self, Cmd::Skip | Cmd::Call(Hole::Value(_)))
    }

    pub fn is_terminated(&self) -> bool {
        matches!(self, Cmd::Skip)
    }

    /// Label of the statement about to execute.
    pub fn current_label(&self) -> Option<u32> {
        match self {
            Cmd::Labelled(l, _) => Some(*l),
            Cmd::Seq(a, b) if a.is_value() => b.current_label(),
            Cmd::Seq(a, _) => a.current_label(),
            _ => None,
        }
    }

    /// Visit every command node (including those inside implementation bodies).
    pub fn visit(&self, f: &mut dyn FnMut(&Cmd, bool)) {
        fn go(c: &Cmd, in_body: bool, f: &mut dyn FnMut(&Cmd, bool)) {
            f(c, in_body);
            let hole = |h: &Hole, f: &mut dyn FnMut(&Cmd, bool)| {
                if let Hole::Body(b) = h {
                    go(&b.cmd, true, f);
                }
            };
            match c {
                Cmd::Seq(a, b) => {
                    go(a, in_body, f);
                    go(b, in_body, f);
                }
                Cmd::If { cond, then_, else_ } => {
                    if let CExp::Hole(h) = cond {
                        hole(h, f);
                    }
                    go(then_, in_body, f);
                    go(else_, in_body, f);
                }
                Cmd::While { body, .. } | Cmd::DoUntil { body, .. } => go(body, in_body, f),
                Cmd::Labelled(_, c) => go(c, in_body, f),
                Cmd::Call(h)
                | Cmd::Assign {
                    rhs: CExp::Hole(h),
                    ..
                } => hole(h, f),
                _ => {}
            }
        }
        go(self, false, f)
    }

    /// Every abstract call in the program.
    pub fn calls(&self) -> Vec<Call> {
        let mut out = Vec::new();
        self.visit(&mut |c, _| {
            let h = match c {
                Cmd::Call(h) => Some(h),
                Cmd::Assign {
                    rhs: CExp::Hole(h), ..
                } => Some(h),
                Cmd::If {
                    cond: CExp::Hole(h),
                    ..
                } => Some(h),
                _ => None,
            };
            if let Some(Hole::Call(call) | Hole::Pending(call)) = h {
                out.push(call.clone());
            }
        });
        out
    }

    /// Registers written or read, split by whether they occur inside an
    /// implementation body. Version outputs of calls are not included.
    pub fn registers(&self) -> (BTreeSet<Reg>, BTreeSet<Reg>) {
        let mut client = BTreeSet::new();
        let mut library = BTreeSet::new();
        self.visit(&mut |c, in_body| {
            let out = if in_body { &mut library } else { &mut client };
            match c {
                Cmd::Assign { reg, rhs } => {
                    out.insert(reg.clone());
                    if let CExp::Expr(e) = rhs {
                        e.registers(out);
                    }
                }
                Cmd::Write { expr, .. } => expr.registers(out),
                Cmd::Read { reg, .. } | Cmd::Fai { reg, .. } => {
                    out.insert(reg.clone());
                }
                Cmd::Cas {
                    reg, expected, new, ..
                } => {
                    out.insert(reg.clone());
                    expected.registers(out);
                    new.registers(out);
                }
                Cmd::If {
                    cond: CExp::Expr(e),
                    ..
                }
                | Cmd::While { cond: e, .. }
                | Cmd::DoUntil { cond: e, .. } => e.registers(out),
                _ => {}
            }
        });
        for call in self.calls() {
            if let Some(a) = &call.arg {
                a.registers(&mut client);
            }
        }
        client.remove(&Reg::rval());
        library.remove(&Reg::rval());
        (client, library)
    }

    /// Auxiliary registers written by `o.m(reg)` version outputs.
    pub fn version_registers(&self) -> BTreeSet<Reg> {
        self.calls()
            .into_iter()
            .filter_map(|c| c.version_out)
            .collect()
    }

    /// Replace every abstract call for which `f` returns a body.
    pub fn fill_calls(&self, f: &dyn Fn(&Call) -> Option<Body>) -> Cmd {
        let fill = |h: &Hole| match h {
            Hole::Call(c) => match f(c) {
                Some(b) => Hole::Body(Box::new(b)),
                None => h.clone(),
            },
            _ => h.clone(),
        };
        match self {
            Cmd::Call(h) => Cmd::Call(fill(h)),
            Cmd::Assign {
                reg,
                rhs: CExp::Hole(h),
            } => Cmd::Assign {
                reg: reg.clone(),
                rhs: CExp::Hole(fill(h)),
            },
            Cmd::Seq(a, b) => Cmd::seq(a.fill_calls(f), b.fill_calls(f)),
            Cmd::If { cond, then_, else_ } => Cmd::If {
                cond: match cond {
                    CExp::Hole(h) => CExp::Hole(fill(h)),
                    e => e.clone(),
                },
                then_: Box::new(then_.fill_calls(f)),
                else_: Box::new(else_.fill_calls(f)),
            },
            Cmd::While { cond, body } => Cmd::While {
                cond: cond.clone(),
                body: Box::new(body.fill_calls(f)),
            },
            Cmd::DoUntil { body, cond } => Cmd::DoUntil {
                body: Box::new(body.fill_calls(f)),
                cond: cond.clone(),
            },
            Cmd::Labelled(l, c) => Cmd::Labelled(*l, Box::new(c.fill_calls(f))),
            c => c.clone(),
        }
    }
}

/// `do C until B` ≡ `C; while ¬B do C`, innermost loops first.
pub fn desugar(cmd: &Cmd) -> Cmd {
    let hole = |h: &Hole| match h {
        Hole::Body(b) => Hole::Body(Box::new(Body {
            cmd: desugar(&b.cmd),
            ret: b.ret.clone(),
        })),
        h => h.clone(),
    };
    let cexp = |c: &CExp| match c {
        CExp::Hole(h) => CExp::Hole(hole(h)),
        e => e.clone(),
    };
    match cmd {
        Cmd::DoUntil { body, cond } => {
            let body = desugar(body);
            Cmd::seq(
                body.clone(),
                Cmd::While {
                    cond: Expr::not(cond.clone()),
                    body: Box::new(body),
                },
            )
        }
        Cmd::Seq(a, b) => Cmd::seq(desugar(a), desugar(b)),
        Cmd::If { cond, then_, else_ } => Cmd::If {
            cond: cexp(cond),
            then_: Box::new(desugar(then_)),
            else_: Box::new(desugar(else_)),
        },
        Cmd::While { cond, body } => Cmd::While {
            cond: cond.clone(),
            body: Box::new(desugar(body)),
        },
        Cmd::Labelled(l, c) => Cmd::Labelled(*l, Box::new(desugar(c))),
        Cmd::Call(h) => Cmd::Call(hole(h)),
        Cmd::Assign { reg, rhs } => Cmd::Assign {
            reg: reg.clone(),
            rhs: cexp(rhs),
        },
        c => c.clone(),
    }
}

/// What a hole may be filled with.
#[derive(Clone, Debug)]
pub enum HoleFill {
    Bot,
    Value(Value),
    Call(Call),
    Cmd(Cmd),
}

/// `C[D]`: fill the leftmost innermost unfilled hole of `cmd`.
pub fn fill_hole(cmd: &Cmd, d: &HoleFill) -> Result<Cmd, ModelError> {
    fn filled(d: &HoleFill) -> Hole {
        match d {
            HoleFill::Bot => Hole::Value(Value::Bot),
            HoleFill::Value(v) => Hole::Value(*v),
            HoleFill::Call(c) => Hole::Call(c.clone()),
            HoleFill::Cmd(c) => Hole::Body(Box::new(Body {
                cmd: c.clone(),
                ret: Expr::Lit(Value::Bot),
            })),
        }
    }
    fn go(cmd: &Cmd, d: &HoleFill) -> Option<Cmd> {
        match cmd {
            Cmd::Call(Hole::Empty) => Some(Cmd::Call(filled(d))),
            Cmd::Assign {
                reg,
                rhs: CExp::Hole(Hole::Empty),
            } => Some(Cmd::Assign {
                reg: reg.clone(),
                rhs: CExp::Hole(filled(d)),
            }),
            Cmd::Seq(a, b) => match go(a, d) {
                Some(a2) => Some(Cmd::Seq(Box::new(a2), b.clone())),
                None => go(b, d).map(|b2| Cmd::Seq(a.clone(), Box::new(b2))),
            },
            Cmd::If { cond, then_, else_ } => {
                if let CExp::Hole(Hole::Empty) = cond {
                    return Some(Cmd::If {
                        cond: CExp::Hole(filled(d)),
                        then_: then_.clone(),
                        else_: else_.clone(),
                    });
                }
                if let Some(t2) = go(then_, d) {
                    return Some(Cmd::If {
                        cond: cond.clone(),
                        then_: Box::new(t2),
                        else_: else_.clone(),
                    });
                }
                go(else_, d).map(|e2| Cmd::If {
                    cond: cond.clone(),
                    then_: then_.clone(),
                    else_: Box::new(e2),
                })
            }
            Cmd::While { cond, body } => go(body, d).map(|b| Cmd::While {
                cond: cond.clone(),
                body: Box::new(b),
            }),
            Cmd::DoUntil { body, cond } => go(body, d).map(|b| Cmd::DoUntil {
                body: Box::new(b),
                cond: cond.clone(),
            }),
            Cmd::Labelled(l, c) => go(c, d).map(|c| Cmd::Labelled(*l, Box::new(c))),
            _ => None,
        }
    }
    go(cmd, d).ok_or(ModelError::NoHole)
}

/// Observable effect of a thread step.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Effect {
    Silent,
    Action(Action),
    /// An abstract method call awaiting the object semantics.
    Call {
        object: Var,
        method: Method,
        arg: Option<Value>,
    },
}

/// One program-level successor of a thread.
#[derive(Clone, Debug)]
pub struct ThreadStep {
    pub component: Component,
    pub effect: Effect,
    pub cmd: Cmd,
    pub ls: LocalState,
}

/// Candidate values for reads of a variable.
pub type Domain<'a> = dyn Fn(&Var) -> Vec<Value> + 'a;

/// All program-level successors of `(cmd, ls)`.
///
/// An empty result means the thread is terminated or blocked.
pub fn local_step(cmd: &Cmd, ls: &LocalState, dom: &Domain<'_>) -> Result<Vec<ThreadStep>, ModelError> {
    step(cmd, ls, dom)
}

fn silent(component: Component, cmd: Cmd, ls: LocalState) -> ThreadStep {
    ThreadStep {
        component,
        effect: Effect::Silent,
        cmd,
        ls,
    }
}

fn acting(action: Action, ls: LocalState) -> ThreadStep {
    ThreadStep {
        component: Component::Client,
        effect: Effect::Action(action),
        cmd: Cmd::Skip,
        ls,
    }
}

fn step(cmd: &Cmd, ls: &LocalState, dom: &Domain<'_>) -> Result<Vec<ThreadStep>, ModelError> {
    let assigned = |r: &Reg, v: Value| {
        let mut l = ls.clone();
        l.set(r.clone(), v);
        l
    };
    Ok(match cmd {
        Cmd::Skip => vec![],
        // the label stays while the thread is inside a call, so the program
        // counter of a thread running a method body is the call's label
        Cmd::Labelled(l, c) => step(c, ls, dom)?
            .into_iter()
            .map(|s| match s.component {
                Component::Library => ThreadStep {
                    cmd: Cmd::Labelled(*l, Box::new(s.cmd)),
                    ..s
                },
                Component::Client => s,
            })
            .collect(),
        Cmd::Assign {
            reg,
            rhs: CExp::Expr(e),
        } => vec![silent(Component::Client, Cmd::Skip, assigned(reg, eval_expr(e, ls)?))],
        Cmd::Assign {
            reg,
            rhs: CExp::Hole(Hole::Value(v)),
        } => vec![silent(Component::Client, Cmd::Skip, assigned(reg, *v))],
        Cmd::Assign {
            reg,
            rhs: CExp::Hole(h),
        } => step_hole(h, ls, dom)?
            .into_iter()
            .map(|(s, h2)| ThreadStep {
                cmd: Cmd::Assign {
                    reg: reg.clone(),
                    rhs: CExp::Hole(h2),
                },
                ..s
            })
            .collect(),
        Cmd::Write { var, expr, release } => vec![acting(
            Action::Write {
                var: var.clone(),
                value: eval_expr(expr, ls)?,
                release: *release,
            },
            ls.clone(),
        )],
        Cmd::Read { reg, var, acquire } => dom(var)
            .into_iter()
            .map(|v| {
                acting(
                    Action::Read {
                        var: var.clone(),
                        value: v,
                        acquire: *acquire,
                    },
                    assigned(reg, v),
                )
            })
            .collect(),
        Cmd::Cas {
            reg,
            var,
            expected,
            new,
        } => {
            let u = eval_expr(expected, ls)?;
            let v = eval_expr(new, ls)?;
            let mut out = vec![acting(
                Action::Update {
                    var: var.clone(),
                    read: u,
                    write: v,
                },
                assigned(reg, Value::Bool(true)),
            )];
            for other in dom(var).into_iter().filter(|w| *w != u) {
                out.push(acting(
                    Action::Read {
                        var: var.clone(),
                        value: other,
                        acquire: false,
                    },
                    assigned(reg, Value::Bool(false)),
                ));
            }
            out
        }
        Cmd::Fai { reg, var } => dom(var)
            .into_iter()
            .filter_map(|v| v.as_int())
            .map(|u| {
                acting(
                    Action::Update {
                        var: var.clone(),
                        read: Value::Int(u),
                        write: Value::Int(u + 1),
                    },
                    assigned(reg, Value::Int(u)),
                )
            })
            .collect(),
        Cmd::Call(Hole::Value(_)) => vec![silent(Component::Client, Cmd::Skip, ls.clone())],
        Cmd::Call(h) => step_hole(h, ls, dom)?
            .into_iter()
            .map(|(s, h2)| ThreadStep {
                cmd: Cmd::Call(h2),
                ..s
            })
            .collect(),
        Cmd::Seq(a, b) if a.is_value() => vec![silent(Component::Client, (**b).clone(), ls.clone())],
        Cmd::Seq(a, b) => step(a, ls, dom)?
            .into_iter()
            .map(|s| ThreadStep {
                cmd: Cmd::Seq(Box::new(s.cmd), b.clone()),
                ..s
            })
            .collect(),
        Cmd::If { cond, then_, else_ } => {
            let branch = |v: Value| -> Result<Vec<ThreadStep>, ModelError> {
                let taken = if boolean(v)? { then_ } else { else_ };
                Ok(vec![silent(Component::Client, (**taken).clone(), ls.clone())])
            };
            match cond {
                CExp::Expr(e) => branch(eval_expr(e, ls)?)?,
                CExp::Hole(Hole::Value(v)) => branch(*v)?,
                CExp::Hole(h) => step_hole(h, ls, dom)?
                    .into_iter()
                    .map(|(s, h2)| ThreadStep {
                        cmd: Cmd::If {
                            cond: CExp::Hole(h2),
                            then_: then_.clone(),
                            else_: else_.clone(),
                        },
                        ..s
                    })
                    .collect(),
            }
        }
        Cmd::While { cond, body } => {
            let next = if boolean(eval_expr(cond, ls)?)? {
                Cmd::seq((**body).clone(), cmd.clone())
            } else {
                Cmd::Skip
            };
            vec![silent(Component::Client, next, ls.clone())]
        }
        Cmd::DoUntil { .. } => step(&desugar(cmd), ls, dom)?,
    })
}

/// Steps inside a hole; all carry the library tag.
fn step_hole(h: &Hole, ls: &LocalState, dom: &Domain<'_>) -> Result<Vec<(ThreadStep, Hole)>, ModelError> {
    Ok(match h {
        Hole::Empty | Hole::Pending(_) | Hole::Value(_) => vec![],
        Hole::Call(call) => {
            let arg = call.arg.as_ref().map(|e| eval_expr(e, ls)).transpose()?;
            vec![(
                ThreadStep {
                    component: Component::Library,
                    effect: Effect::Call {
                        object: call.object.clone(),
                        method: call.method,
                        arg,
                    },
                    cmd: Cmd::Skip,
                    ls: ls.clone(),
                },
                Hole::Pending(call.clone()),
            )]
        }
        Hole::Body(b) => {
            let mut out = Vec::new();
            for s in step(&b.cmd, ls, dom)? {
                let mut ls2 = s.ls;
                let hole = if s.cmd.is_terminated() {
                    let v = eval_expr(&b.ret, &ls2)?;
                    ls2.set(Reg::rval(), v);
                    Hole::Value(v)
                } else {
                    Hole::Body(Box::new(Body {
                        cmd: s.cmd,
                        ret: b.ret.clone(),
                    }))
                };
                out.push((
                    ThreadStep {
                        component: Component::Library,
                        effect: s.effect,
                        cmd: Cmd::Skip,
                        ls: ls2,
                    },
                    hole,
                ));
            }
            out
        }
    })
}

/// Complete the pending call of a thread with the object's result: the hole
/// takes the value, `rval` is set, and the version output (if any) is written.
pub fn resolve_call(cmd: &Cmd, ls: &LocalState, value: Value, version: Option<u32>) -> (Cmd, LocalState) {
    fn go(cmd: &Cmd, value: Value, found: &mut Option<Call>) -> Cmd {
        let fix = |h: &Hole, found: &mut Option<Call>| match h {
            Hole::Pending(c) if found.is_none() => {
                *found = Some(c.clone());
                Hole::Value(value)
            }
            h => h.clone(),
        };
        match cmd {
            Cmd::Call(h) => Cmd::Call(fix(h, found)),
            Cmd::Assign {
                reg,
                rhs: CExp::Hole(h),
            } => Cmd::Assign {
                reg: reg.clone(),
                rhs: CExp::Hole(fix(h, found)),
            },
            Cmd::If {
                cond: CExp::Hole(h),
                then_,
                else_,
            } => Cmd::If {
                cond: CExp::Hole(fix(h, found)),
                then_: then_.clone(),
                else_: else_.clone(),
            },
            Cmd::Seq(a, b) => Cmd::Seq(Box::new(go(a, value, found)), b.clone()),
            Cmd::Labelled(l, c) => Cmd::Labelled(*l, Box::new(go(c, value, found))),
            c => c.clone(),
        }
    }
    let mut found = None;
    let cmd2 = go(cmd, value, &mut found);
    let mut ls2 = ls.clone();
    ls2.set(Reg::rval(), value);
    if let (Some(call), Some(n)) = (found, version) {
        if let Some(r) = call.version_out {
            ls2.set(r, Value::Int(n as i64));
        }
    }
    (cmd2, ls2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_dom(_: &Var) -> Vec<Value> {
        vec![]
    }

    fn dom01(_: &Var) -> Vec<Value> {
        vec![Value::Int(0), Value::Int(1), Value::Int(2)]
    }

    #[test]
    fn expression_evaluation() {
        let ls = LocalState::new().with("r", 1).with("r1", 1);
        assert_eq!(eval_expr(&Expr::lit(5), &ls), Ok(Value::Int(5)));
        assert_eq!(eval_expr(&Expr::reg("r"), &ls), Ok(Value::Int(1)));
        let e = Expr::bin(BinOp::Eq, Expr::reg("r1"), Expr::lit(1));
        assert_eq!(eval_expr(&e, &ls), Ok(Value::Bool(true)));
        assert_eq!(
            eval_expr(&Expr::reg("zz"), &ls),
            Err(ModelError::UnboundLocal(Reg::new("zz")))
        );
        let even = Expr::Un(UnOp::Even, Box::new(Expr::bin(BinOp::Add, Expr::reg("r"), Expr::lit(1))));
        assert_eq!(eval_expr(&even, &ls), Ok(Value::Bool(true)));
    }

    #[test]
    fn local_assign_is_silent() {
        let c = Cmd::seq(
            Cmd::Assign {
                reg: Reg::new("r"),
                rhs: CExp::Expr(Expr::lit(5)),
            },
            Cmd::Write {
                var: Var::new("x"),
                expr: Expr::reg("r"),
                release: false,
            },
        );
        let steps = local_step(&c, &LocalState::new(), &no_dom).unwrap();
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].effect, Effect::Silent);
        assert_eq!(steps[0].ls.get(&Reg::new("r")), Some(Value::Int(5)));
        // ⊥; x := r  steps silently to x := r
        let next = local_step(&steps[0].cmd, &steps[0].ls, &no_dom).unwrap();
        assert_eq!(next.len(), 1);
        assert!(matches!(next[0].cmd, Cmd::Write { .. }));
    }

    #[test]
    fn write_emits_action() {
        let c = Cmd::Write {
            var: Var::new("x"),
            expr: Expr::bin(BinOp::Add, Expr::lit(2), Expr::lit(3)),
            release: true,
        };
        let steps = local_step(&c, &LocalState::new(), &no_dom).unwrap();
        assert_eq!(
            steps[0].effect,
            Effect::Action(Action::Write {
                var: Var::new("x"),
                value: Value::Int(5),
                release: true
            })
        );
        assert_eq!(steps[0].component, Component::Client);
    }

    #[test]
    fn cas_candidates_partition() {
        let c = Cmd::Cas {
            reg: Reg::new("r"),
            var: Var::new("x"),
            expected: Expr::lit(0),
            new: Expr::lit(1),
        };
        let steps = local_step(&c, &LocalState::new(), &dom01).unwrap();
        let successes: Vec<_> = steps
            .iter()
            .filter(|s| matches!(s.effect, Effect::Action(Action::Update { .. })))
            .collect();
        assert_eq!(successes.len(), 1);
        assert_eq!(successes[0].ls.get(&Reg::new("r")), Some(Value::Bool(true)));
        let failures: Vec<_> = steps
            .iter()
            .filter_map(|s| match &s.effect {
                Effect::Action(Action::Read { value, acquire, .. }) => {
                    assert!(!acquire);
                    assert_eq!(s.ls.get(&Reg::new("r")), Some(Value::Bool(false)));
                    Some(*value)
                }
                _ => None,
            })
            .collect();
        assert_eq!(failures, vec![Value::Int(1), Value::Int(2)]);
    }

    #[test]
    fn fai_reads_and_increments() {
        let c = Cmd::Fai {
            reg: Reg::new("m"),
            var: Var::new("nt"),
        };
        let steps = local_step(&c, &LocalState::new(), &dom01).unwrap();
        assert_eq!(steps.len(), 3);
        for s in &steps {
            if let Effect::Action(Action::Update { read, write, .. }) = &s.effect {
                assert_eq!(write.as_int(), read.as_int().map(|n| n + 1));
                assert_eq!(s.ls.get(&Reg::new("m")), Some(*read));
            } else {
                panic!("expected update");
            }
        }
    }

    #[test]
    fn bot_hole_dissolves() {
        let c = Cmd::seq(
            Cmd::Call(Hole::Empty),
            Cmd::Assign {
                reg: Reg::new("r"),
                rhs: CExp::Expr(Expr::lit(1)),
            },
        );
        let c = fill_hole(&c, &HoleFill::Bot).unwrap();
        let steps = local_step(&c, &LocalState::new(), &no_dom).unwrap();
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].effect, Effect::Silent);
        assert!(matches!(steps[0].cmd, Cmd::Assign { .. }));
    }

    #[test]
    fn value_in_hole_assigns() {
        let c = Cmd::Assign {
            reg: Reg::new("r"),
            rhs: CExp::Hole(Hole::Empty),
        };
        let c = fill_hole(&c, &HoleFill::Value(Value::Int(7))).unwrap();
        let steps = local_step(&c, &LocalState::new(), &no_dom).unwrap();
        assert_eq!(steps[0].ls.get(&Reg::new("r")), Some(Value::Int(7)));
        assert!(steps[0].cmd.is_terminated());
    }

    #[test]
    fn body_steps_carry_library_tag() {
        let body = Cmd::seq(
            Cmd::Write {
                var: Var::new("g"),
                expr: Expr::lit(1),
                release: false,
            },
            Cmd::Write {
                var: Var::new("g"),
                expr: Expr::lit(2),
                release: true,
            },
        );
        let c = fill_hole(&Cmd::Call(Hole::Empty), &HoleFill::Cmd(body)).unwrap();
        let steps = local_step(&c, &LocalState::new(), &no_dom).unwrap();
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].component, Component::Library);
        assert!(matches!(steps[0].effect, Effect::Action(Action::Write { .. })));
    }

    #[test]
    fn no_hole_is_an_error() {
        assert_eq!(fill_hole(&Cmd::Skip, &HoleFill::Bot), Err(ModelError::NoHole));
    }

    #[test]
    fn fill_is_leftmost() {
        let c = Cmd::seq(Cmd::Call(Hole::Empty), Cmd::Call(Hole::Empty));
        let c = fill_hole(&c, &HoleFill::Value(Value::Int(1))).unwrap();
        match &c {
            Cmd::Seq(a, b) => {
                assert_eq!(**a, Cmd::Call(Hole::Value(Value::Int(1))));
                assert_eq!(**b, Cmd::Call(Hole::Empty));
            }
            _ => unreachable!(),
        }
    }

    fn pop(r: &str) -> Cmd {
        Cmd::Assign {
            reg: Reg::new(r),
            rhs: CExp::Hole(Hole::Call(Call {
                object: Var::new("s"),
                method: Method::Deq,
                arg: None,
                version_out: None,
            })),
        }
    }

    #[test]
    fn desugar_do_until() {
        let cond = Expr::bin(BinOp::Eq, Expr::reg("r"), Expr::lit(1));
        let d = desugar(&Cmd::DoUntil {
            body: Box::new(pop("r")),
            cond: cond.clone(),
        });
        assert_eq!(
            d,
            Cmd::seq(
                pop("r"),
                Cmd::While {
                    cond: Expr::not(cond.clone()),
                    body: Box::new(pop("r"))
                }
            )
        );
        // nothing to do without a do-until
        assert_eq!(desugar(&pop("r")), pop("r"));
        // nested: the inner loop is desugared inside both copies of the outer body
        let nested = Cmd::DoUntil {
            body: Box::new(Cmd::DoUntil {
                body: Box::new(pop("r")),
                cond: cond.clone(),
            }),
            cond: cond.clone(),
        };
        let mut loops = 0;
        desugar(&nested).visit(&mut |c, _| {
            assert!(!matches!(c, Cmd::DoUntil { .. }));
            if matches!(c, Cmd::While { .. }) {
                loops += 1;
            }
        });
        assert_eq!(loops, 3);
    }

    #[test]
    fn call_request_and_resolution() {
        let c = Cmd::Labelled(1, Box::new(pop("r")));
        let steps = local_step(&c, &LocalState::new(), &no_dom).unwrap();
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].component, Component::Library);
        assert!(matches!(steps[0].effect, Effect::Call { method: Method::Deq, .. }));
        let (c2, ls2) = resolve_call(&steps[0].cmd, &steps[0].ls, Value::Int(4), None);
        assert_eq!(ls2.get(&Reg::rval()), Some(Value::Int(4)));
        let s = local_step(&c2, &ls2, &no_dom).unwrap();
        assert_eq!(s[0].ls.get(&Reg::new("r")), Some(Value::Int(4)));
    }

    #[test]
    fn labels_follow_execution() {
        let c = Cmd::seq(
            Cmd::Labelled(
                2,
                Box::new(Cmd::Assign {
                    reg: Reg::new("a"),
                    rhs: CExp::Expr(Expr::lit(1)),
                }),
            ),
            Cmd::Labelled(3, Box::new(Cmd::Skip)),
        );
        assert_eq!(c.current_label(), Some(2));
        let s = &local_step(&c, &LocalState::new(), &no_dom).unwrap()[0];
        assert_eq!(s.cmd.current_label(), Some(3));
    }
}
