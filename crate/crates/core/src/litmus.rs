//! The litmus/outline file format: lexer, parser, pretty-printer and model
//! construction.
//!
//! ```text
//! litmus "mp"
//! mode explore
//! init d := 0; f := 0;
//! thread 1
//!   d := 5;
//!   f :=R 1
//! end
//! thread 2
//!   do r1 <-A f until r1 = 1;
//!   r2 <- d
//! end
//! observe r1, r2;
//! final { r2 = 5 }
//! ```
//!
//! A name assigned with `:=` is a shared variable when it is initialised in
//! `init` and never used as a register; every other name in register position
//! is a register. Initial values for registers become local initialisations of
//! the threads that mention them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::assertion::{Assertion, Atom, ObjAtom, ObjOp, Target};
use crate::error::ModelError;
use crate::explore::{Configuration, System};
use crate::objects::ObjectSpec;
use crate::outline::ProofOutline;
use crate::program::{BinOp, CExp, Call, Cmd, Expr, Hole, Method, UnOp};
use crate::state::{InitSpec, ObjectKind};
use crate::types::{Component, Reg, ThreadId, Value, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LitmusError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{0}")]
    Semantic(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Explore,
    Outline,
    Hoare,
    Refine,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Explore => "explore",
            Mode::Outline => "outline",
            Mode::Hoare => "hoare",
            Mode::Refine => "refine",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObjectDecl {
    pub name: String,
    pub kind: ObjectKind,
    /// Suggested implementation for refinement runs.
    pub implementation: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThreadDecl {
    pub id: u32,
    pub body: Cmd,
    pub annotations: BTreeMap<u32, Assertion>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LitmusFile {
    pub name: String,
    pub mode: Mode,
    pub inits: Vec<(String, Value)>,
    pub object: Option<ObjectDecl>,
    pub threads: Vec<ThreadDecl>,
    pub observe: Vec<String>,
    pub pre: Option<Assertion>,
    pub invariant: Option<Assertion>,
    pub post: Option<Assertion>,
}

// ---------------------------------------------------------------- lexer

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    Sym(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const SYMBOLS: &[&str] = &[
    "=>", "!=", "<=", ">=", "&&", "||", ":=", "<-", "(", ")", "{", "}", ",", ";", ":", ".", "=", "<", ">", "+", "-",
    "*", "!", "@",
];

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn lex(src: &str) -> Result<Vec<Token>, LitmusError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let err = |line, col, msg: String| LitmusError::Syntax { line, col, msg };
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (l0, c0) = (line, col);
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            let n = s
                .parse()
                .map_err(|_| err(l0, c0, format!("integer literal `{s}` out of range")))?;
            col += i - start;
            out.push(Token {
                tok: Tok::Int(n),
                line: l0,
                col: c0,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && is_ident_char(chars[i]) {
                i += 1;
            }
            col += i - start;
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line: l0,
                col: c0,
            });
            continue;
        }
        if c == '"' {
            let start = i + 1;
            i += 1;
            while i < chars.len() && chars[i] != '"' && chars[i] != '\n' {
                i += 1;
            }
            if chars.get(i) != Some(&'"') {
                return Err(err(l0, c0, "unterminated string".into()));
            }
            let s: String = chars[start..i].iter().collect();
            i += 1;
            col += s.chars().count() + 2;
            out.push(Token {
                tok: Tok::Str(s),
                line: l0,
                col: c0,
            });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        let Some(sym) = SYMBOLS.iter().find(|s| rest.starts_with(**s)) else {
            return Err(err(l0, c0, format!("unexpected character `{c}`")));
        };
        let mut len = sym.chars().count();
        let mut sym: &'static str = sym;
        // `:=R` and `<-A` annotate the access; the suffix letter must stand alone
        let suffix = match sym {
            ":=" => Some(('R', ":=R")),
            "<-" => Some(('A', "<-A")),
            _ => None,
        };
        if let Some((letter, long)) = suffix {
            if chars.get(i + len) == Some(&letter) && !chars.get(i + len + 1).is_some_and(|c| is_ident_char(*c)) {
                sym = long;
                len += 1;
            }
        }
        i += len;
        col += len;
        out.push(Token {
            tok: Tok::Sym(sym),
            line: l0,
            col: c0,
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

// ---------------------------------------------------------------- parser

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, LitmusError>;

const STMT_END: &[&str] = &["end", "else", "until"];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_at<T>(&self, tok: &Token, msg: impl Into<String>) -> PResult<T> {
        Err(LitmusError::Syntax {
            line: tok.line,
            col: tok.col,
            msg: msg.into(),
        })
    }

    fn error<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let t = self.toks[self.pos].clone();
        let found = describe(&t.tok);
        self.error_at(&t, format!("{}, found {found}", msg.into()))
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == k)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.next();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if self.is_kw(k) {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.error(format!("expected `{s}`"))
        }
    }

    fn expect_kw(&mut self, k: &str) -> PResult<()> {
        if self.eat_kw(k) {
            Ok(())
        } else {
            self.error(format!("expected `{k}`"))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(s)
            }
            _ => self.error("expected identifier"),
        }
    }

    fn int(&mut self) -> PResult<i64> {
        let neg = self.eat_sym("-");
        match *self.peek() {
            Tok::Int(n) => {
                self.next();
                Ok(if neg { -n } else { n })
            }
            _ => self.error("expected integer"),
        }
    }

    fn thread_id(&mut self) -> PResult<ThreadId> {
        let n = self.int()?;
        u32::try_from(n).map(ThreadId).or_else(|_| self.error("expected thread id"))
    }

    fn label(&mut self) -> PResult<u32> {
        let n = self.int()?;
        u32::try_from(n).or_else(|_| self.error("expected label"))
    }

    // ---- file

    fn file(&mut self) -> PResult<LitmusFile> {
        self.expect_kw("litmus")?;
        let name = match self.peek().clone() {
            Tok::Str(s) | Tok::Ident(s) => {
                self.next();
                s
            }
            _ => return self.error("expected test name"),
        };
        let mut f = LitmusFile {
            name,
            mode: Mode::Explore,
            inits: vec![],
            object: None,
            threads: vec![],
            observe: vec![],
            pre: None,
            invariant: None,
            post: None,
        };
        loop {
            if self.eat_kw("mode") {
                let t = self.toks[self.pos].clone();
                f.mode = match self.ident()?.as_str() {
                    "explore" => Mode::Explore,
                    "outline" => Mode::Outline,
                    "hoare" => Mode::Hoare,
                    "refine" => Mode::Refine,
                    m => return self.error_at(&t, format!("unknown mode `{m}`")),
                };
            } else if self.eat_kw("init") {
                while let Tok::Ident(_) = self.peek() {
                    if matches!(self.peek_at(1), Tok::Sym(":=")) {
                        let x = self.ident()?;
                        self.expect_sym(":=")?;
                        let v = self.value()?;
                        f.inits.push((x, v));
                        self.eat_sym(";");
                    } else {
                        break;
                    }
                }
            } else if self.eat_kw("object") {
                let name = self.ident()?;
                self.expect_sym(":")?;
                let t = self.toks[self.pos].clone();
                let kind = match self.ident()?.as_str() {
                    "lock" => ObjectKind::Lock,
                    "queue" => ObjectKind::Queue,
                    k => return self.error_at(&t, format!("unknown object kind `{k}`")),
                };
                let mut implementation = None;
                if self.eat_kw("impl") {
                    self.expect_sym("=")?;
                    // implementation names may contain dashes
                    let mut name = self.ident()?;
                    while self.is_sym("-") && matches!(self.peek_at(1), Tok::Ident(_)) {
                        self.next();
                        name = format!("{name}-{}", self.ident()?);
                    }
                    implementation = Some(name);
                }
                self.eat_sym(";");
                if f.object.is_some() {
                    return self.error_at(&t, "only one object may be declared");
                }
                f.object = Some(ObjectDecl {
                    name,
                    kind,
                    implementation,
                });
            } else if self.eat_kw("thread") {
                let id = self.label()?;
                let mut annotations = BTreeMap::new();
                let body = self.stmts(&mut annotations)?;
                self.expect_kw("end")?;
                f.threads.push(ThreadDecl { id, body, annotations });
            } else if self.eat_kw("observe") {
                f.observe.push(self.ident()?);
                while self.eat_sym(",") {
                    f.observe.push(self.ident()?);
                }
                self.eat_sym(";");
            } else if self.is_kw("pre") || self.is_kw("invariant") || self.is_kw("final") {
                let which = self.ident()?;
                self.expect_sym("{")?;
                let a = self.assertion()?;
                self.expect_sym("}")?;
                match which.as_str() {
                    "pre" => f.pre = Some(a),
                    "invariant" => f.invariant = Some(a),
                    _ => f.post = Some(a),
                }
            } else if matches!(self.peek(), Tok::Eof) {
                break;
            } else {
                return self.error("expected a section (`mode`, `init`, `object`, `thread`, `observe`, `pre`, `invariant` or `final`)");
            }
        }
        Ok(f)
    }

    fn value(&mut self) -> PResult<Value> {
        match self.peek().clone() {
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.next();
                Ok(Value::Bool(s == "true"))
            }
            Tok::Ident(s) if s == "bot" => {
                self.next();
                Ok(Value::Bot)
            }
            Tok::Ident(s) if s == "empty" => {
                self.next();
                Ok(Value::Empty)
            }
            _ => Ok(Value::Int(self.int()?)),
        }
    }

    // ---- statements

    fn at_block_end(&self) -> bool {
        STMT_END.iter().any(|k| self.is_kw(k)) || matches!(self.peek(), Tok::Eof)
    }

    fn stmts(&mut self, ann: &mut BTreeMap<u32, Assertion>) -> PResult<Cmd> {
        let mut out = Vec::new();
        while !self.at_block_end() {
            out.push(self.stmt(ann)?);
            if !self.eat_sym(";") && !self.at_block_end() && !matches!(self.peek(), Tok::Int(_)) {
                // statements may also be separated by line breaks alone
                let prev = &self.toks[self.pos - 1];
                if self.toks[self.pos].line == prev.line {
                    return self.error("expected `;`");
                }
            }
        }
        Ok(Cmd::seq_all(out))
    }

    fn stmt(&mut self, ann: &mut BTreeMap<u32, Assertion>) -> PResult<Cmd> {
        if let Tok::Int(_) = self.peek() {
            let tok = self.toks[self.pos].clone();
            let l = self.label()?;
            self.expect_sym(":")?;
            if self.eat_sym("{") {
                let a = self.assertion()?;
                self.expect_sym("}")?;
                if ann.insert(l, a).is_some() {
                    return self.error_at(&tok, format!("label {l} annotated twice"));
                }
            }
            let inner = if self.at_block_end() || self.is_sym(";") {
                Cmd::Skip
            } else {
                self.stmt(ann)?
            };
            return Ok(Cmd::Labelled(l, Box::new(inner)));
        }
        if self.eat_kw("skip") {
            return Ok(Cmd::Skip);
        }
        if self.eat_kw("if") {
            let cond = if matches!(self.peek_at(1), Tok::Sym(".")) {
                CExp::Hole(Hole::Call(self.call()?))
            } else {
                CExp::Expr(self.expr()?)
            };
            self.expect_kw("then")?;
            let then_ = self.stmts(ann)?;
            let else_ = if self.eat_kw("else") { self.stmts(ann)? } else { Cmd::Skip };
            self.expect_kw("end")?;
            return Ok(Cmd::If {
                cond,
                then_: Box::new(then_),
                else_: Box::new(else_),
            });
        }
        if self.eat_kw("while") {
            let cond = self.expr()?;
            self.expect_kw("do")?;
            let body = self.stmts(ann)?;
            self.expect_kw("end")?;
            return Ok(Cmd::While {
                cond,
                body: Box::new(body),
            });
        }
        if self.eat_kw("do") {
            let body = self.stmts(ann)?;
            self.expect_kw("until")?;
            let cond = self.expr()?;
            return Ok(Cmd::DoUntil {
                body: Box::new(body),
                cond,
            });
        }
        if matches!(self.peek_at(1), Tok::Sym(".")) {
            return Ok(Cmd::Call(Hole::Call(self.call()?)));
        }
        let name = self.ident()?;
        let op = self.next();
        match op.tok {
            Tok::Sym(":=") | Tok::Sym(":=R") => {
                if matches!(self.peek(), Tok::Eof | Tok::Sym(";")) || self.at_block_end() {
                    // point at the `=` of the assignment operator
                    return self.error_at(
                        &Token {
                            col: op.col + 1,
                            ..op.clone()
                        },
                        "expected expression after assignment",
                    );
                }
                if op.tok == Tok::Sym(":=") && matches!(self.peek_at(1), Tok::Sym(".")) {
                    return Ok(Cmd::Assign {
                        reg: Reg::new(&name),
                        rhs: CExp::Hole(Hole::Call(self.call()?)),
                    });
                }
                let e = self.expr()?;
                Ok(if op.tok == Tok::Sym(":=R") {
                    Cmd::Write {
                        var: Var::new(&name),
                        expr: e,
                        release: true,
                    }
                } else {
                    Cmd::Assign {
                        reg: Reg::new(&name),
                        rhs: CExp::Expr(e),
                    }
                })
            }
            Tok::Sym("<-") | Tok::Sym("<-A") => {
                let acquire = op.tok == Tok::Sym("<-A");
                let reg = Reg::new(&name);
                if !acquire && self.is_kw("CAS") {
                    self.next();
                    self.expect_sym("(")?;
                    let var = Var::new(&self.ident()?);
                    self.expect_sym(",")?;
                    let expected = self.expr()?;
                    self.expect_sym(",")?;
                    let new = self.expr()?;
                    self.expect_sym(")")?;
                    return Ok(Cmd::Cas {
                        reg,
                        var,
                        expected,
                        new,
                    });
                }
                if !acquire && self.is_kw("FAI") {
                    self.next();
                    self.expect_sym("(")?;
                    let var = Var::new(&self.ident()?);
                    self.expect_sym(")")?;
                    return Ok(Cmd::Fai { reg, var });
                }
                if !acquire && matches!(self.peek_at(1), Tok::Sym(".")) {
                    return Ok(Cmd::Assign {
                        reg,
                        rhs: CExp::Hole(Hole::Call(self.call()?)),
                    });
                }
                let var = Var::new(&self.ident()?);
                Ok(Cmd::Read { reg, var, acquire })
            }
            _ => self.error_at(&op, format!("expected `:=`, `:=R`, `<-` or `<-A` after `{name}`, found {}", describe(&op.tok))),
        }
    }

    fn call(&mut self) -> PResult<Call> {
        let object = Var::new(&self.ident()?);
        self.expect_sym(".")?;
        let t = self.toks[self.pos].clone();
        let method = match self.ident()?.as_str() {
            "acquire" => Method::Acquire,
            "release" => Method::Release,
            "enq" => Method::Enq,
            "deq" => Method::Deq,
            m => return self.error_at(&t, format!("unknown method `{m}`")),
        };
        self.expect_sym("(")?;
        let (mut arg, mut version_out) = (None, None);
        if !self.is_sym(")") {
            match method {
                Method::Enq => arg = Some(self.expr()?),
                Method::Acquire => version_out = Some(Reg::new(&self.ident()?)),
                _ => return self.error("this method takes no argument"),
            }
        }
        self.expect_sym(")")?;
        if method == Method::Enq && arg.is_none() {
            return self.error_at(&t, "`enq` takes one argument");
        }
        Ok(Call {
            object,
            method,
            arg,
            version_out,
        })
    }

    // ---- expressions

    fn expr(&mut self) -> PResult<Expr> {
        self.expr_prec(1)
    }

    fn binop(&self) -> Option<BinOp> {
        let Tok::Sym(s) = self.peek() else { return None };
        Some(match *s {
            "||" => BinOp::Or,
            "&&" => BinOp::And,
            "=" => BinOp::Eq,
            "!=" => BinOp::Ne,
            "<" => BinOp::Lt,
            "<=" => BinOp::Le,
            ">" => BinOp::Gt,
            ">=" => BinOp::Ge,
            "+" => BinOp::Add,
            "-" => BinOp::Sub,
            "*" => BinOp::Mul,
            _ => return None,
        })
    }

    /// Precedence climbing; comparisons do not associate.
    fn expr_prec(&mut self, min: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            let p = op.precedence();
            if p < min {
                break;
            }
            self.next();
            let rhs = self.expr_prec(p + 1)?;
            lhs = Expr::bin(op, lhs, rhs);
            if p == 3 && self.binop().is_some_and(|o| o.precedence() == 3) {
                return self.error("comparison operators do not chain");
            }
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat_sym("!") {
            return Ok(Expr::Un(UnOp::Not, Box::new(self.unary()?)));
        }
        if self.is_sym("-") {
            if let Tok::Int(n) = *self.peek_at(1) {
                self.next();
                self.next();
                return Ok(Expr::Lit(Value::Int(-n)));
            }
            self.next();
            return Ok(Expr::Un(UnOp::Neg, Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.next();
                Ok(Expr::Lit(Value::Int(n)))
            }
            Tok::Sym("(") => {
                self.next();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(s) => {
                self.next();
                match s.as_str() {
                    "true" => Ok(Expr::Lit(Value::Bool(true))),
                    "false" => Ok(Expr::Lit(Value::Bool(false))),
                    "bot" => Ok(Expr::Lit(Value::Bot)),
                    "empty" => Ok(Expr::Lit(Value::Empty)),
                    "even" | "odd" => {
                        self.expect_sym("(")?;
                        let e = self.expr()?;
                        self.expect_sym(")")?;
                        let op = if s == "even" { UnOp::Even } else { UnOp::Odd };
                        Ok(Expr::Un(op, Box::new(e)))
                    }
                    _ => Ok(Expr::Reg(Reg::new(&s))),
                }
            }
            _ => self.error("expected expression"),
        }
    }

    // ---- assertions

    fn assertion(&mut self) -> PResult<Assertion> {
        if self.is_kw("forall") || self.is_kw("exists") {
            let universal = self.ident()? == "forall";
            let name = Reg::new(&self.ident()?);
            self.expect_kw("in")?;
            let vals = self.value_set()?;
            self.expect_sym(".")?;
            let body = Box::new(self.assertion()?);
            return Ok(if universal {
                Assertion::Forall(name, vals, body)
            } else {
                Assertion::Exists(name, vals, body)
            });
        }
        let lhs = self.disjunction()?;
        if self.eat_sym("=>") {
            let rhs = self.assertion()?;
            return Ok(Assertion::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn value_set(&mut self) -> PResult<Vec<Value>> {
        self.expect_sym("{")?;
        let mut vals = Vec::new();
        if !self.is_sym("}") {
            vals.push(self.value()?);
            while self.eat_sym(",") {
                vals.push(self.value()?);
            }
        }
        self.expect_sym("}")?;
        Ok(vals)
    }

    fn disjunction(&mut self) -> PResult<Assertion> {
        let mut parts = vec![self.conjunction()?];
        while self.eat_sym("||") {
            parts.push(self.conjunction()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Assertion::Or(parts) })
    }

    fn conjunction(&mut self) -> PResult<Assertion> {
        let mut parts = vec![self.negation()?];
        while self.eat_sym("&&") {
            parts.push(self.negation()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Assertion::And(parts) })
    }

    fn negation(&mut self) -> PResult<Assertion> {
        if self.is_sym("!") {
            self.next();
            return Ok(Assertion::not(self.negation()?));
        }
        self.assertion_primary()
    }

    fn assertion_primary(&mut self) -> PResult<Assertion> {
        if self.is_sym("(") {
            // either a parenthesised assertion or the start of an expression atom
            let save = self.pos;
            self.next();
            if let Ok(a) = self.assertion() {
                if self.eat_sym(")") && !self.continues_expr(0) {
                    return Ok(a);
                }
            }
            self.pos = save;
            return self.expr_atom();
        }
        let Tok::Ident(word) = self.peek().clone() else {
            return self.expr_atom();
        };
        let is_call = matches!(self.peek_at(1), Tok::Sym("("));
        match word.as_str() {
            "true" | "false" if !self.continues_expr(1) => {
                self.next();
                Ok(Assertion::Bool(word == "true"))
            }
            "pobs" | "dobs" if is_call => {
                self.next();
                self.expect_sym("(")?;
                let thread = self.thread_id()?;
                self.expect_sym(",")?;
                let target = self.target()?;
                self.expect_sym(")")?;
                let comp = self.component()?;
                Ok(Assertion::Atom(if word == "pobs" {
                    Atom::Possible { thread, target, comp }
                } else {
                    Atom::Definite { thread, target, comp }
                }))
            }
            "cond" if is_call => {
                self.next();
                self.expect_sym("(")?;
                let thread = self.thread_id()?;
                self.expect_sym(",")?;
                let first = self.target()?;
                self.expect_sym(",")?;
                let y = Var::new(&self.ident()?);
                self.expect_sym("=")?;
                let v = self.operand()?;
                self.expect_sym(")")?;
                match first {
                    Target::Var(x, u) => {
                        let comp = self.component()?;
                        Ok(Assertion::Atom(Atom::Conditional {
                            thread,
                            x,
                            u,
                            y,
                            v,
                            comp,
                        }))
                    }
                    Target::Obj(obj) => Ok(Assertion::Atom(Atom::CrossConditional { thread, obj, y, v })),
                }
            }
            "cvd" | "cvv" if is_call => {
                self.next();
                self.expect_sym("(")?;
                let o = self.obj_atom()?;
                self.expect_sym(")")?;
                Ok(Assertion::Atom(if word == "cvd" { Atom::Covered(o) } else { Atom::Hidden(o) }))
            }
            "pc" if is_call => {
                self.next();
                self.expect_sym("(")?;
                let thread = self.thread_id()?;
                self.expect_sym(")")?;
                let labels = if self.eat_kw("in") {
                    self.expect_sym("{")?;
                    let mut ls = vec![self.label()?];
                    while self.eat_sym(",") {
                        ls.push(self.label()?);
                    }
                    self.expect_sym("}")?;
                    ls
                } else {
                    self.expect_sym("=")?;
                    vec![self.label()?]
                };
                Ok(Assertion::Atom(Atom::Pc { thread, labels }))
            }
            _ => self.expr_atom(),
        }
    }

    /// Whether the token `k` ahead continues an expression (a binary operator or `in`).
    fn continues_expr(&self, k: usize) -> bool {
        match self.peek_at(k) {
            Tok::Sym(s) => ["=", "!=", "<", "<=", ">", ">=", "+", "-", "*"].contains(s),
            Tok::Ident(s) => s == "in",
            _ => false,
        }
    }

    fn component(&mut self) -> PResult<Option<Component>> {
        if !self.eat_sym("@") {
            return Ok(None);
        }
        let t = self.toks[self.pos].clone();
        match self.ident()?.as_str() {
            "C" => Ok(Some(Component::Client)),
            "L" => Ok(Some(Component::Library)),
            c => self.error_at(&t, format!("unknown component `{c}` (expected C or L)")),
        }
    }

    /// Value position inside an atom: additive expressions only.
    fn operand(&mut self) -> PResult<Expr> {
        self.expr_prec(4)
    }

    fn target(&mut self) -> PResult<Target> {
        if matches!(self.peek_at(1), Tok::Sym(".")) {
            return Ok(Target::Obj(self.obj_atom()?));
        }
        let x = Var::new(&self.ident()?);
        self.expect_sym("=")?;
        Ok(Target::Var(x, self.operand()?))
    }

    fn obj_atom(&mut self) -> PResult<ObjAtom> {
        let object = Var::new(&self.ident()?);
        self.expect_sym(".")?;
        let t = self.toks[self.pos].clone();
        let m = self.ident()?;
        let versioned = |p: &mut Parser, rest: &str| -> PResult<Expr> {
            if rest.is_empty() {
                p.expect_sym("(")?;
                let e = p.expr()?;
                p.expect_sym(")")?;
                Ok(e)
            } else if let Ok(n) = rest.parse::<i64>() {
                Ok(Expr::Lit(Value::Int(n)))
            } else {
                Ok(Expr::Reg(Reg::new(rest)))
            }
        };
        let op = if m == "init" || m == "init_0" {
            ObjOp::Init
        } else if let Some(rest) = m.strip_prefix("acquire_") {
            ObjOp::Acquire(versioned(self, rest)?)
        } else if let Some(rest) = m.strip_prefix("release_") {
            ObjOp::Release(versioned(self, rest)?)
        } else if m == "enq" || m == "deq" {
            self.expect_sym("(")?;
            let e = self.expr()?;
            self.expect_sym(")")?;
            if m == "enq" {
                ObjOp::Enq(e)
            } else {
                ObjOp::Deq(e)
            }
        } else {
            return self.error_at(&t, format!("unknown object operation `{m}`"));
        };
        Ok(ObjAtom { object, op })
    }

    fn expr_atom(&mut self) -> PResult<Assertion> {
        let e = self.operand()?;
        if self.eat_kw("in") {
            self.expect_sym("{")?;
            let mut set = Vec::new();
            if !self.is_sym("}") {
                set.push(self.operand()?);
                while self.eat_sym(",") {
                    set.push(self.operand()?);
                }
            }
            self.expect_sym("}")?;
            return Ok(Assertion::Atom(Atom::In(e, set)));
        }
        match self.binop() {
            Some(op) if op.precedence() == 3 => {
                self.next();
                let rhs = self.operand()?;
                Ok(Assertion::Atom(Atom::Pred(Expr::bin(op, e, rhs))))
            }
            _ => Ok(Assertion::Atom(Atom::Pred(e))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Int(n) => format!("`{n}`"),
        Tok::Str(s) => format!("\"{s}\""),
        Tok::Sym(s) => format!("`{s}`"),
        Tok::Eof => "end of input".into(),
    }
}

/// Parse a litmus file, resolving shared-variable writes.
pub fn parse_litmus(src: &str) -> Result<LitmusFile, LitmusError> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    let mut f = p.file()?;
    resolve_writes(&mut f);
    validate(&f)?;
    Ok(f)
}

/// Parse a standalone assertion.
pub fn parse_assertion(src: &str) -> Result<Assertion, LitmusError> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    let a = p.assertion()?;
    if !matches!(p.peek(), Tok::Eof) {
        return p.error("unexpected input after assertion");
    }
    Ok(a)
}

/// Parse a standalone thread body.
pub fn parse_statements(src: &str) -> Result<(Cmd, BTreeMap<u32, Assertion>), LitmusError> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    let mut ann = BTreeMap::new();
    let c = p.stmts(&mut ann)?;
    if !matches!(p.peek(), Tok::Eof) {
        return p.error("unexpected input after statements");
    }
    Ok((c, ann))
}

/// Parse an implementation body; `x := e` with `x` in `shared` is a relaxed write.
pub fn parse_body(src: &str, shared: &[&str]) -> Result<Cmd, LitmusError> {
    let (c, _) = parse_statements(src)?;
    Ok(map_cmd(&c, &|c| match c {
        Cmd::Assign {
            reg,
            rhs: CExp::Expr(e),
        } if shared.contains(&reg.as_str()) => Some(Cmd::Write {
            var: Var::new(reg.as_str()),
            expr: e.clone(),
            release: false,
        }),
        _ => None,
    }))
}

/// Names in register position anywhere in the file.
fn register_names(f: &LitmusFile) -> BTreeSet<String> {
    let mut regs = BTreeSet::new();
    for t in &f.threads {
        t.body.visit(&mut |c, _| {
            let mut rs = BTreeSet::new();
            match c {
                Cmd::Assign { rhs: CExp::Expr(e), .. } => e.registers(&mut rs),
                Cmd::Assign { reg, rhs: CExp::Hole(_) } => {
                    rs.insert(reg.clone());
                }
                Cmd::Write { expr, .. } => expr.registers(&mut rs),
                Cmd::Read { reg, .. } | Cmd::Fai { reg, .. } => {
                    rs.insert(reg.clone());
                }
                Cmd::Cas {
                    reg, expected, new, ..
                } => {
                    rs.insert(reg.clone());
                    expected.registers(&mut rs);
                    new.registers(&mut rs);
                }
                Cmd::If { cond: CExp::Expr(e), .. } | Cmd::While { cond: e, .. } | Cmd::DoUntil { cond: e, .. } => {
                    e.registers(&mut rs)
                }
                _ => {}
            }
            regs.extend(rs.into_iter().map(|r| r.to_string()));
        });
        for c in t.body.calls() {
            let mut rs = BTreeSet::new();
            if let Some(a) = &c.arg {
                a.registers(&mut rs);
            }
            rs.extend(c.version_out);
            regs.extend(rs.into_iter().map(|r| r.to_string()));
        }
    }
    regs
}

fn map_cmd(c: &Cmd, f: &dyn Fn(&Cmd) -> Option<Cmd>) -> Cmd {
    if let Some(r) = f(c) {
        return r;
    }
    match c {
        Cmd::Seq(a, b) => Cmd::seq(map_cmd(a, f), map_cmd(b, f)),
        Cmd::If { cond, then_, else_ } => Cmd::If {
            cond: cond.clone(),
            then_: Box::new(map_cmd(then_, f)),
            else_: Box::new(map_cmd(else_, f)),
        },
        Cmd::While { cond, body } => Cmd::While {
            cond: cond.clone(),
            body: Box::new(map_cmd(body, f)),
        },
        Cmd::DoUntil { body, cond } => Cmd::DoUntil {
            body: Box::new(map_cmd(body, f)),
            cond: cond.clone(),
        },
        Cmd::Labelled(l, c) => Cmd::Labelled(*l, Box::new(map_cmd(c, f))),
        c => c.clone(),
    }
}

/// Turn `x := e` into a relaxed write when `x` is an initialised shared
/// variable that is never used as a register.
fn resolve_writes(f: &mut LitmusFile) {
    let regs = register_names(f);
    let globals: BTreeSet<String> = f
        .inits
        .iter()
        .map(|(x, _)| x.clone())
        .filter(|x| !regs.contains(x))
        .collect();
    for t in &mut f.threads {
        t.body = map_cmd(&t.body, &|c| match c {
            Cmd::Assign {
                reg,
                rhs: CExp::Expr(e),
            } if globals.contains(reg.as_str()) => Some(Cmd::Write {
                var: Var::new(reg.as_str()),
                expr: e.clone(),
                release: false,
            }),
            _ => None,
        });
    }
}

fn validate(f: &LitmusFile) -> Result<(), LitmusError> {
    let sem = |m: String| Err(LitmusError::Semantic(m));
    let mut seen = BTreeSet::new();
    for (x, _) in &f.inits {
        if !seen.insert(x.clone()) {
            return sem(format!("`{x}` initialised more than once"));
        }
    }
    let regs = register_names(f);
    let globals: BTreeSet<&str> = f
        .inits
        .iter()
        .map(|(x, _)| x.as_str())
        .filter(|x| !regs.contains(*x))
        .collect();
    let mut ids = BTreeSet::new();
    for t in &f.threads {
        if !ids.insert(t.id) {
            return sem(format!("thread {} declared twice", t.id));
        }
        let mut err = None;
        t.body.visit(&mut |c, _| {
            let var = match c {
                Cmd::Write { var, .. } | Cmd::Read { var, .. } | Cmd::Cas { var, .. } | Cmd::Fai { var, .. } => var,
                _ => return,
            };
            if !globals.contains(var.as_str()) && err.is_none() {
                err = Some(format!("undeclared variable `{var}` in thread {}", t.id));
            }
        });
        for c in t.body.calls() {
            let ok = f.object.as_ref().is_some_and(|o| o.name == c.object.as_str());
            if !ok && err.is_none() {
                err = Some(format!("undeclared object `{}` in thread {}", c.object, t.id));
            }
        }
        if let Some(e) = err {
            return sem(e);
        }
    }
    if let Some(o) = &f.object {
        if seen.contains(&o.name) {
            return sem(format!("object `{}` is also initialised as a variable", o.name));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- printer

fn call_str(c: &Call) -> String {
    let arg = match (&c.arg, &c.version_out) {
        (Some(a), _) => a.to_string(),
        (None, Some(r)) => r.to_string(),
        _ => String::new(),
    };
    format!("{}.{}({arg})", c.object, c.method.name())
}

fn print_cmd(c: &Cmd, ann: &BTreeMap<u32, Assertion>, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    let mut items = Vec::new();
    let mut cur = c;
    while let Cmd::Seq(a, b) = cur {
        items.push(&**a);
        cur = b;
    }
    items.push(cur);
    for (i, item) in items.iter().enumerate() {
        out.push_str(&pad);
        print_stmt(item, ann, indent, out);
        if i + 1 < items.len() {
            out.push(';');
        }
        out.push('\n');
    }
}

fn print_stmt(c: &Cmd, ann: &BTreeMap<u32, Assertion>, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    match c {
        Cmd::Skip => out.push_str("skip"),
        Cmd::Labelled(l, inner) => {
            let _ = write!(out, "{l}: ");
            if let Some(a) = ann.get(l) {
                let _ = write!(out, "{{{a}}} ");
            }
            print_stmt(inner, ann, indent, out);
        }
        Cmd::Assign { reg, rhs } => match rhs {
            CExp::Expr(e) => {
                let _ = write!(out, "{reg} := {e}");
            }
            CExp::Hole(Hole::Call(call)) => {
                let _ = write!(out, "{reg} := {}", call_str(call));
            }
            CExp::Hole(_) => {
                let _ = write!(out, "{reg} := <hole>");
            }
        },
        Cmd::Write { var, expr, release } => {
            let _ = write!(out, "{var} {} {expr}", if *release { ":=R" } else { ":=" });
        }
        Cmd::Read { reg, var, acquire } => {
            let _ = write!(out, "{reg} {} {var}", if *acquire { "<-A" } else { "<-" });
        }
        Cmd::Cas {
            reg,
            var,
            expected,
            new,
        } => {
            let _ = write!(out, "{reg} <- CAS({var}, {expected}, {new})");
        }
        Cmd::Fai { reg, var } => {
            let _ = write!(out, "{reg} <- FAI({var})");
        }
        Cmd::Call(Hole::Call(call)) => out.push_str(&call_str(call)),
        Cmd::Call(_) => out.push_str("<hole>"),
        Cmd::Seq(..) => {
            // only reachable for sequences nested directly inside labels
            let mut s = String::new();
            print_cmd(c, ann, 0, &mut s);
            out.push_str(s.trim_end().replace('\n', " ").as_str());
        }
        Cmd::If { cond, then_, else_ } => {
            match cond {
                CExp::Expr(e) => {
                    let _ = writeln!(out, "if {e} then");
                }
                CExp::Hole(Hole::Call(call)) => {
                    let _ = writeln!(out, "if {} then", call_str(call));
                }
                CExp::Hole(_) => out.push_str("if <hole> then\n"),
            }
            print_cmd(then_, ann, indent + 1, out);
            if **else_ != Cmd::Skip {
                let _ = writeln!(out, "{pad}else");
                print_cmd(else_, ann, indent + 1, out);
            }
            let _ = write!(out, "{pad}end");
        }
        Cmd::While { cond, body } => {
            let _ = writeln!(out, "while {cond} do");
            print_cmd(body, ann, indent + 1, out);
            let _ = write!(out, "{pad}end");
        }
        Cmd::DoUntil { body, cond } => {
            out.push_str("do\n");
            print_cmd(body, ann, indent + 1, out);
            let _ = write!(out, "{pad}until {cond}");
        }
    }
}

/// Render a thread body in the concrete syntax.
pub fn print_statements(c: &Cmd, ann: &BTreeMap<u32, Assertion>) -> String {
    let mut s = String::new();
    print_cmd(c, ann, 0, &mut s);
    s
}

impl fmt::Display for LitmusFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "litmus \"{}\"", self.name)?;
        writeln!(f, "mode {}", self.mode.name())?;
        if !self.inits.is_empty() {
            f.write_str("init")?;
            for (x, v) in &self.inits {
                write!(f, " {x} := {v};")?;
            }
            writeln!(f)?;
        }
        if let Some(o) = &self.object {
            let kind = match o.kind {
                ObjectKind::Lock => "lock",
                ObjectKind::Queue => "queue",
            };
            write!(f, "object {} : {kind}", o.name)?;
            if let Some(i) = &o.implementation {
                write!(f, " impl={i}")?;
            }
            writeln!(f, ";")?;
        }
        for t in &self.threads {
            writeln!(f, "thread {}", t.id)?;
            let mut s = String::new();
            print_cmd(&t.body, &t.annotations, 1, &mut s);
            f.write_str(&s)?;
            writeln!(f, "end")?;
        }
        if !self.observe.is_empty() {
            writeln!(f, "observe {};", self.observe.join(", "))?;
        }
        for (kw, a) in [("pre", &self.pre), ("invariant", &self.invariant), ("final", &self.post)] {
            if let Some(a) = a {
                writeln!(f, "{kw} {{ {a} }}")?;
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------- models

/// A litmus file turned into something executable.
#[derive(Clone, Debug)]
pub struct Model {
    pub name: String,
    pub system: System,
    pub init: Configuration,
    pub observe: Vec<(ThreadId, Reg)>,
    pub outline: ProofOutline,
}

impl LitmusFile {
    /// Registers used by thread `id`, excluding `rval`.
    pub fn thread_registers(&self, id: u32) -> BTreeSet<Reg> {
        let mut out = BTreeSet::new();
        if let Some(t) = self.threads.iter().find(|t| t.id == id) {
            let (client, _) = t.body.registers();
            out.extend(client);
            out.extend(t.body.version_registers());
            for c in t.body.calls() {
                if let Some(a) = &c.arg {
                    a.registers(&mut out);
                }
            }
        }
        out
    }

    /// Shared variables (initialised names that are not registers).
    pub fn globals(&self) -> Vec<(Var, Value)> {
        let regs = register_names(self);
        self.inits
            .iter()
            .filter(|(x, _)| !regs.contains(x))
            .map(|(x, v)| (Var::new(x), *v))
            .collect()
    }

    pub fn programs(&self) -> BTreeMap<ThreadId, Cmd> {
        self.threads.iter().map(|t| (ThreadId(t.id), t.body.clone())).collect()
    }

    /// Initial register values per thread.
    pub fn local_inits(&self) -> BTreeMap<ThreadId, Vec<(Reg, Value)>> {
        let regs = register_names(self);
        let mut out: BTreeMap<ThreadId, Vec<(Reg, Value)>> = BTreeMap::new();
        for (x, v) in &self.inits {
            if !regs.contains(x) {
                continue;
            }
            for t in &self.threads {
                if self.thread_registers(t.id).contains(&Reg::new(x)) {
                    out.entry(ThreadId(t.id)).or_default().push((Reg::new(x), *v));
                }
            }
        }
        out
    }

    pub fn object_spec(&self) -> Option<ObjectSpec> {
        self.object.as_ref().map(|o| ObjectSpec {
            name: Var::new(&o.name),
            kind: o.kind,
        })
    }

    pub fn init_spec(&self) -> InitSpec {
        InitSpec {
            globals: self.globals(),
            library_vars: BTreeSet::new(),
            object: self.object_spec().map(|o| (o.name, o.kind)),
            threads: self.threads.iter().map(|t| ThreadId(t.id)).collect(),
        }
    }

    /// Observed registers; all client registers when no `observe` line is given.
    pub fn observed(&self) -> Vec<(ThreadId, Reg)> {
        let mut out = Vec::new();
        for t in &self.threads {
            let regs = self.thread_registers(t.id);
            for r in regs {
                if self.observe.is_empty() || self.observe.iter().any(|o| o == r.as_str()) {
                    out.push((ThreadId(t.id), r));
                }
            }
        }
        out
    }

    pub fn outline(&self) -> ProofOutline {
        ProofOutline {
            annotations: self
                .threads
                .iter()
                .flat_map(|t| t.annotations.iter().map(move |(l, a)| ((ThreadId(t.id), *l), a.clone())))
                .collect(),
            invariant: self.invariant.clone(),
            pre: self.pre.clone(),
            post: self.post.clone(),
        }
    }

    /// The program over the abstract object.
    pub fn model(&self) -> Result<Model, LitmusError> {
        let system = System::new(self.object_spec().into_iter().collect());
        let init = system.initial(&self.init_spec(), self.programs(), &self.local_inits())?;
        Ok(Model {
            name: self.name.clone(),
            system,
            init,
            observe: self.observed(),
            outline: self.outline(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MP: &str = r#"
litmus "mp-relacq"
mode explore
init d := 0; f := 0;
thread 1
  d := 5;
  f :=R 1
end
thread 2
  do r1 <-A f until r1 = 1;
  r2 <- d
end
observe r1, r2;
final { r2 = 5 }
"#;

    #[test]
    fn parses_message_passing() {
        let f = parse_litmus(MP).unwrap();
        assert_eq!(f.name, "mp-relacq");
        assert_eq!(f.threads.len(), 2);
        let mut rel = 0;
        let mut acq = 0;
        for t in &f.threads {
            t.body.visit(&mut |c, _| match c {
                Cmd::Write { release: true, .. } => rel += 1,
                Cmd::Read { acquire: true, .. } => acq += 1,
                _ => {}
            });
        }
        assert_eq!((rel, acq), (1, 1));
        assert_eq!(f.globals().len(), 2);
        // round trip through the printer
        assert_eq!(parse_litmus(&f.to_string()).unwrap(), f);
    }

    #[test]
    fn missing_expression_reports_assignment_column() {
        let err = parse_statements("x := ").unwrap_err();
        assert_eq!(
            err,
            LitmusError::Syntax {
                line: 1,
                col: 4,
                msg: "expected expression after assignment".into()
            }
        );
    }

    #[test]
    fn undeclared_variable_is_rejected() {
        let src = "litmus t\nthread 1\n r <- x\nend\n";
        assert!(matches!(parse_litmus(src), Err(LitmusError::Semantic(_))));
        let dup = "litmus t\ninit x := 0; x := 1;\nthread 1\n r <- x\nend\n";
        assert!(matches!(parse_litmus(dup), Err(LitmusError::Semantic(_))));
    }

    #[test]
    fn labels_and_annotations() {
        let (c, ann) = parse_statements("1: {pc(1) = 1} if l.acquire() then 2: d := 5; 3: l.release() end; 4: {true}").unwrap();
        assert_eq!(ann.len(), 2);
        assert_eq!(c.current_label(), Some(1));
        let Cmd::Seq(_, last) = &c else { panic!() };
        assert_eq!(**last, Cmd::Labelled(4, Box::new(Cmd::Skip)));
    }

    #[test]
    fn assertion_syntax() {
        for src in [
            "pobs(1, x = 0)",
            "dobs(2, l.init)@L",
            "cond(2, l.release_2, d1 = 5)",
            "cond(2, f = 1, d = 5)@C",
            "!(pc(1) in {2, 3, 4} && pc(2) in {2, 3, 4}) && rl in {1, 3}",
            "rl = 1 => r1 = 0 && dobs(2, d2 = 0)",
            "forall u in {1, 3} . cvv(l.release_u) => pobs(1, l.acquire_(u + 1))",
            "(r1 + 1) * 2 = 4",
        ] {
            let a = parse_assertion(src).unwrap_or_else(|e| panic!("{src}: {e}"));
            let again = parse_assertion(&a.to_string()).unwrap();
            assert_eq!(a, again, "{src}");
        }
    }

    #[test]
    fn register_classification() {
        let src = r#"
litmus t
init d := 0; rl := 1;
object l : lock;
thread 1
  1: if l.acquire() then 2: d := 5; 3: l.release() end
  4:
end
thread 2
  1: if l.acquire(rl) then 2: r1 <- d; 3: l.release() end
  4:
end
"#;
        let f = parse_litmus(src).unwrap();
        assert_eq!(f.globals(), vec![(Var::new("d"), Value::Int(0))]);
        let li = f.local_inits();
        assert_eq!(li.get(&ThreadId(2)).unwrap(), &vec![(Reg::new("rl"), Value::Int(1))]);
        assert!(!li.contains_key(&ThreadId(1)));
        let m = f.model().unwrap();
        assert_eq!(m.init.pc(ThreadId(1)), Some(1));
    }
}
