//! Runtime values and environments.
//!
//! Quoted expressions are represented homoiconically: a quoted compound form
//! is an ordinary proper list, a quoted identifier is a symbol, and quoted
//! literals are themselves. This is what lets programs treat code as data
//! (`eval`, grammars stored in quoted lists) with no extra machinery.
//!
//! The distinguished `error` value is an ordinary value, not a Rust error:
//! failed preconditions produce it and it propagates through evaluation.

use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;

use indexmap::IndexMap;
use rustc_hash::FxBuildHasher;

use crate::erp::ErpKind;
use crate::expr::{format_char, format_real, Expr, Formals, NodeId, Symbol};
use crate::trace::Address;

#[derive(Clone)]
pub enum Value {
    Nil,
    Bool(bool),
    Int(i64),
    Real(f64),
    Char(char),
    Symbol(Symbol),
    Pair(Rc<(Value, Value)>),
    Env(Environment),
    Proc(Procedure),
    Error,
}

#[derive(Clone)]
pub enum Procedure {
    Lambda(Rc<LambdaProc>),
    Primitive(PrimOp),
    Erp(ErpKind),
    Memoized(Rc<MemoProc>),
    DpMemoized(Rc<DpMemoProc>),
    /// A fresh-tag predicate: applying it to a value answers whether that
    /// value is this very tag. Two tags are equal only if minted as one.
    Gensym(u64),
}

pub struct LambdaProc {
    pub lambda_id: NodeId,
    pub formals: Formals,
    pub body: Expr,
    pub env: Environment,
    /// Where this closure was created; stable across re-executions that take
    /// the same control-flow path, which is what memo keys need.
    pub birth: Address,
}

pub struct MemoProc {
    pub inner: Procedure,
    pub birth: Address,
}

pub struct DpMemoProc {
    pub alpha: f64,
    pub inner: Procedure,
    pub birth: Address,
}

/// Deterministic built-ins, dispatched in the evaluator.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PrimOp {
    Pair,
    First,
    Rest,
    List,
    IsNull,
    IsPair,
    IsSymbol,
    IsBoolean,
    IsNumber,
    IsInteger,
    IsReal,
    IsChar,
    IsProcedure,
    Add,
    Sub,
    Mul,
    Div,
    Abs,
    Less,
    Greater,
    LessEq,
    GreaterEq,
    NumEq,
    Not,
    And,
    Or,
    Eval,
    Apply,
    Query,
    LexQuery,
    Mem,
    DpMem,
    GensymNew,
}

impl PrimOp {
    pub fn name(self) -> &'static str {
        match self {
            PrimOp::Pair => "pair",
            PrimOp::First => "first",
            PrimOp::Rest => "rest",
            PrimOp::List => "list",
            PrimOp::IsNull => "null?",
            PrimOp::IsPair => "pair?",
            PrimOp::IsSymbol => "symbol?",
            PrimOp::IsBoolean => "boolean?",
            PrimOp::IsNumber => "number?",
            PrimOp::IsInteger => "integer?",
            PrimOp::IsReal => "real?",
            PrimOp::IsChar => "char?",
            PrimOp::IsProcedure => "procedure?",
            PrimOp::Add => "+",
            PrimOp::Sub => "-",
            PrimOp::Mul => "*",
            PrimOp::Div => "/",
            PrimOp::Abs => "abs",
            PrimOp::Less => "<",
            PrimOp::Greater => ">",
            PrimOp::LessEq => "<=",
            PrimOp::GreaterEq => ">=",
            PrimOp::NumEq => "=",
            PrimOp::Not => "not",
            PrimOp::And => "and",
            PrimOp::Or => "or",
            PrimOp::Eval => "eval",
            PrimOp::Apply => "apply",
            PrimOp::Query => "query",
            PrimOp::LexQuery => "lex-query",
            PrimOp::Mem => "mem",
            PrimOp::DpMem => "DPmem",
            PrimOp::GensymNew => "gensym",
        }
    }
}

impl Value {
    pub fn pair(a: Value, b: Value) -> Value {
        Value::Pair(Rc::new((a, b)))
    }

    pub fn symbol(s: &str) -> Value {
        Value::Symbol(s.into())
    }

    pub fn list(items: impl IntoIterator<Item = Value, IntoIter: DoubleEndedIterator>) -> Value {
        let mut out = Value::Nil;
        for item in items.into_iter().rev() {
            out = Value::pair(item, out);
        }
        out
    }

    /// Collect a proper list into a vector; `None` for improper lists.
    pub fn list_items(&self) -> Option<Vec<Value>> {
        let mut items = Vec::new();
        let mut cur = self.clone();
        loop {
            match cur {
                Value::Nil => return Some(items),
                Value::Pair(cell) => {
                    items.push(cell.0.clone());
                    cur = cell.1.clone();
                }
                _ => return None,
            }
        }
    }

    pub fn is_error(&self) -> bool {
        matches!(self, Value::Error)
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Value::Bool(true))
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Value::Int(n) => Some(*n as f64),
            Value::Real(x) => Some(*x),
            _ => None,
        }
    }
}

/// Structural equality with numeric promotion: `(= 1 1.0)` holds, reals
/// otherwise compare by bits (so `nan = nan` and `-0.0` differs from `0.0`).
/// Procedures and environments compare by identity.
pub fn values_equal(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Nil, Value::Nil) => true,
        (Value::Bool(x), Value::Bool(y)) => x == y,
        (Value::Int(x), Value::Int(y)) => x == y,
        (Value::Real(x), Value::Real(y)) => x.to_bits() == y.to_bits(),
        (Value::Int(x), Value::Real(y)) | (Value::Real(y), Value::Int(x)) => {
            (*x as f64).to_bits() == y.to_bits()
        }
        (Value::Char(x), Value::Char(y)) => x == y,
        (Value::Symbol(x), Value::Symbol(y)) => x == y,
        (Value::Pair(x), Value::Pair(y)) => {
            // Walk the cdr chain iteratively so long lists cannot exhaust the
            // stack; recursion is only as deep as car nesting.
            let (mut x, mut y) = (x.clone(), y.clone());
            loop {
                if Rc::ptr_eq(&x, &y) {
                    return true;
                }
                if !values_equal(&x.0, &y.0) {
                    return false;
                }
                match (x.1.clone(), y.1.clone()) {
                    (Value::Pair(nx), Value::Pair(ny)) => {
                        x = nx;
                        y = ny;
                    }
                    (tx, ty) => return values_equal(&tx, &ty),
                }
            }
        }
        (Value::Env(x), Value::Env(y)) => x.ptr_eq(y),
        (Value::Proc(x), Value::Proc(y)) => procedures_equal(x, y),
        (Value::Error, Value::Error) => true,
        _ => false,
    }
}

pub fn procedures_equal(a: &Procedure, b: &Procedure) -> bool {
    match (a, b) {
        (Procedure::Lambda(x), Procedure::Lambda(y)) => Rc::ptr_eq(x, y),
        (Procedure::Primitive(x), Procedure::Primitive(y)) => x == y,
        (Procedure::Erp(x), Procedure::Erp(y)) => x == y,
        (Procedure::Memoized(x), Procedure::Memoized(y)) => Rc::ptr_eq(x, y),
        (Procedure::DpMemoized(x), Procedure::DpMemoized(y)) => Rc::ptr_eq(x, y),
        (Procedure::Gensym(x), Procedure::Gensym(y)) => x == y,
        _ => false,
    }
}

/// User-facing printer: canonical, deterministic, and for data values it
/// reparses to an equal value.
pub fn display_value(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v).unwrap();
    out
}

fn write_value(out: &mut impl fmt::Write, v: &Value) -> fmt::Result {
    match v {
        Value::Nil => write!(out, "()"),
        Value::Bool(b) => write!(out, "{}", if *b { "true" } else { "false" }),
        Value::Int(n) => write!(out, "{}", n),
        Value::Real(x) => write!(out, "{}", format_real(*x)),
        Value::Char(c) => write!(out, "{}", format_char(*c)),
        Value::Symbol(s) => write!(out, "{}", s),
        Value::Pair(_) => {
            write!(out, "(")?;
            let mut cur = v.clone();
            let mut first = true;
            loop {
                match cur {
                    Value::Pair(cell) => {
                        if !first {
                            write!(out, " ")?;
                        }
                        first = false;
                        write_value(out, &cell.0)?;
                        cur = cell.1.clone();
                    }
                    Value::Nil => break,
                    tail => {
                        write!(out, " . ")?;
                        write_value(out, &tail)?;
                        break;
                    }
                }
            }
            write!(out, ")")
        }
        Value::Env(_) => write!(out, "#<env>"),
        Value::Proc(Procedure::Gensym(tag)) => write!(out, "#<gensym:{}>", tag),
        Value::Proc(_) => write!(out, "#<procedure>"),
        Value::Error => write!(out, "error"),
    }
}

/// Identity-bearing canonical form, used for memo-table keys. Unlike
/// `display_value` it distinguishes procedures (by birth site) and keeps the
/// integer/real distinction, so distinct arguments get distinct keys.
pub fn key_string(v: &Value) -> String {
    let mut out = String::new();
    write_key(&mut out, v).unwrap();
    out
}

fn write_key(out: &mut impl fmt::Write, v: &Value) -> fmt::Result {
    match v {
        Value::Real(x) => write!(out, "r:{}", format_real(*x)),
        Value::Pair(_) => {
            let mut cur = v.clone();
            let mut closers = 0usize;
            while let Value::Pair(cell) = cur {
                write!(out, "(")?;
                write_key(out, &cell.0)?;
                write!(out, " . ")?;
                closers += 1;
                cur = cell.1.clone();
            }
            write_key(out, &cur)?;
            for _ in 0..closers {
                write!(out, ")")?;
            }
            Ok(())
        }
        Value::Proc(p) => match p {
            Procedure::Lambda(l) => write!(out, "#<procedure:{}@{}>", l.lambda_id.0, l.birth),
            Procedure::Primitive(op) => write!(out, "#<primitive:{}>", op.name()),
            Procedure::Erp(kind) => write!(out, "#<erp:{}>", kind.name()),
            Procedure::Memoized(m) => write!(out, "#<memoized:{}>", m.birth),
            Procedure::DpMemoized(m) => write!(out, "#<dp-memoized:{}>", m.birth),
            Procedure::Gensym(tag) => write!(out, "#<gensym:{}>", tag),
        },
        Value::Env(_) => write!(out, "#<env>"),
        other => write_value(out, other),
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_value(f, self)
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_value(f, self)
    }
}

/// A frame of bindings plus a parent link. Environments are values; extending
/// builds a child and never touches the parent. The one place bindings are
/// inserted into an existing frame is `define` (top level and the body of a
/// letrec-style define), which is what makes recursive and forward-referencing
/// definitions work.
#[derive(Clone)]
pub struct Environment(Rc<EnvNode>);

struct EnvNode {
    frame: RefCell<FrameStore>,
    parent: Option<Environment>,
}

/// Almost every frame holds a handful of bindings, where a scanned vector
/// beats a hash map; frames that keep growing (the global one) spill over.
enum FrameStore {
    Small(Vec<(Symbol, Value)>),
    Large(IndexMap<Symbol, Value, FxBuildHasher>),
}

const FRAME_SPILL_AT: usize = 32;

impl FrameStore {
    fn get(&self, name: &str) -> Option<&Value> {
        match self {
            FrameStore::Small(entries) => {
                entries.iter().find(|(k, _)| &**k == name).map(|(_, v)| v)
            }
            FrameStore::Large(map) => map.get(name),
        }
    }

    fn insert(&mut self, name: Symbol, value: Value) {
        match self {
            FrameStore::Small(entries) => {
                if let Some(slot) = entries.iter_mut().find(|(k, _)| *k == name) {
                    slot.1 = value;
                    return;
                }
                entries.push((name, value));
                if entries.len() > FRAME_SPILL_AT {
                    *self = FrameStore::Large(entries.drain(..).collect());
                }
            }
            FrameStore::Large(map) => {
                map.insert(name, value);
            }
        }
    }
}

impl Environment {
    pub fn new() -> Self {
        Environment(Rc::new(EnvNode {
            frame: RefCell::new(FrameStore::Small(Vec::new())),
            parent: None,
        }))
    }

    pub fn child(&self) -> Self {
        Environment(Rc::new(EnvNode {
            frame: RefCell::new(FrameStore::Small(Vec::new())),
            parent: Some(self.clone()),
        }))
    }

    pub fn extend(&self, bindings: impl IntoIterator<Item = (Symbol, Value)>) -> Self {
        let child = self.child();
        {
            let mut frame = child.0.frame.borrow_mut();
            for (name, value) in bindings {
                frame.insert(name, value);
            }
        }
        child
    }

    pub fn lookup(&self, name: &str) -> Option<Value> {
        let mut env = self;
        loop {
            if let Some(v) = env.0.frame.borrow().get(name) {
                return Some(v.clone());
            }
            match &env.0.parent {
                Some(parent) => env = parent,
                None => return None,
            }
        }
    }

    /// Insert into this frame directly.
    pub fn define_here(&self, name: Symbol, value: Value) {
        self.0.frame.borrow_mut().insert(name, value);
    }

    pub fn ptr_eq(&self, other: &Environment) -> bool {
        Rc::ptr_eq(&self.0, &other.0)
    }

    pub fn bindings_snapshot(&self) -> Vec<(Symbol, Value)> {
        match &*self.0.frame.borrow() {
            FrameStore::Small(entries) => entries.clone(),
            FrameStore::Large(map) => map.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
        }
    }
}

impl Default for Environment {
    fn default() -> Self {
        Environment::new()
    }
}

impl fmt::Debug for Environment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#<env>")
    }
}
