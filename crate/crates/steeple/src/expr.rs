//! Expression trees produced by the reader.
//!
//! Trees are immutable and cheaply cloneable. Every node carries a `NodeId`
//! assigned in reader order; lambda node ids double as the static identity of
//! the procedure a lambda evaluates to, which the trace addressing scheme
//! relies on.

use std::fmt;
use std::rc::Rc;

pub type Symbol = Rc<str>;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct NodeId(pub u32);

/// Hands out fresh node ids. One generator per reader pipeline, so identical
/// source always yields identical ids.
#[derive(Clone, Debug, Default)]
pub struct NodeIdGen {
    next: u32,
}

impl NodeIdGen {
    pub fn new() -> Self {
        NodeIdGen { next: 0 }
    }

    pub fn fresh(&mut self) -> NodeId {
        let id = NodeId(self.next);
        self.next += 1;
        id
    }
}

/// 1-based source position.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct Position {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone)]
pub struct Expr(Rc<ExprNode>);

pub struct ExprNode {
    pub id: NodeId,
    pub pos: Position,
    pub kind: ExprKind,
}

#[derive(Clone, Debug)]
pub enum Formals {
    /// `(lambda (a b) e)`; symbols are distinct.
    Fixed(Vec<Symbol>),
    /// `(lambda args e)`: all arguments collected into one list.
    Variadic(Symbol),
}

#[derive(Clone)]
pub enum CondClause {
    Test(Expr, Expr),
    Else(Expr),
}

pub enum ExprKind {
    Bool(bool),
    Int(i64),
    Real(f64),
    Char(char),
    /// Empty list literal; only ever appears inside quoted data.
    Nil,
    Var(Symbol),
    App(Vec<Expr>),
    Lambda { formals: Formals, body: Expr },
    If { cond: Expr, then: Expr, els: Expr },
    Define { name: Symbol, value: Expr },
    /// The quoted subtree is kept as uninterpreted data: inside it only
    /// atoms, `Nil` and `App` (list) nodes occur.
    Quote(Expr),
    /// Sugar, removed by `desugar`.
    Let { bindings: Vec<(Symbol, Expr)>, body: Expr },
    Cond { clauses: Vec<CondClause> },
    Case { key: Expr, clauses: Vec<(Vec<Expr>, Expr)>, default: Option<Expr> },
}

impl Expr {
    pub fn new(id: NodeId, pos: Position, kind: ExprKind) -> Self {
        Expr(Rc::new(ExprNode { id, pos, kind }))
    }

    pub fn id(&self) -> NodeId {
        self.0.id
    }

    pub fn pos(&self) -> Position {
        self.0.pos
    }

    pub fn kind(&self) -> &ExprKind {
        &self.0.kind
    }

    /// True if any `Let`/`Cond`/`Case` node remains anywhere outside quoted
    /// data.
    pub fn contains_sugar(&self) -> bool {
        match self.kind() {
            ExprKind::Let { .. } | ExprKind::Cond { .. } | ExprKind::Case { .. } => true,
            ExprKind::App(items) => items.iter().any(Expr::contains_sugar),
            ExprKind::Lambda { body, .. } => body.contains_sugar(),
            ExprKind::If { cond, then, els } => {
                cond.contains_sugar() || then.contains_sugar() || els.contains_sugar()
            }
            ExprKind::Define { value, .. } => value.contains_sugar(),
            _ => false,
        }
    }
}

/// Canonical printing of a real: always distinguishable from an integer and
/// reparses to the identical bit pattern.
pub fn format_real(x: f64) -> String {
    if x.is_finite() {
        let s = format!("{:?}", x);
        if s.contains('.') || s.contains('e') || s.contains('E') {
            s
        } else {
            format!("{}.0", s)
        }
    } else if x.is_nan() {
        "+nan.0".to_string()
    } else if x > 0.0 {
        "+inf.0".to_string()
    } else {
        "-inf.0".to_string()
    }
}

pub fn format_char(c: char) -> String {
    match c {
        ' ' => "#\\space".to_string(),
        '\n' => "#\\newline".to_string(),
        '\t' => "#\\tab".to_string(),
        other => format!("#\\{}", other),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind() {
            ExprKind::Bool(b) => write!(f, "{}", if *b { "true" } else { "false" }),
            ExprKind::Int(n) => write!(f, "{}", n),
            ExprKind::Real(x) => write!(f, "{}", format_real(*x)),
            ExprKind::Char(c) => write!(f, "{}", format_char(*c)),
            ExprKind::Nil => write!(f, "()"),
            ExprKind::Var(s) => write!(f, "{}", s),
            ExprKind::App(items) => {
                write!(f, "(")?;
                for (i, e) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{}", e)?;
                }
                write!(f, ")")
            }
            ExprKind::Lambda { formals, body } => {
                match formals {
                    Formals::Fixed(names) => {
                        write!(f, "(lambda (")?;
                        for (i, n) in names.iter().enumerate() {
                            if i > 0 {
                                write!(f, " ")?;
                            }
                            write!(f, "{}", n)?;
                        }
                        write!(f, ") {})", body)
                    }
                    Formals::Variadic(name) => write!(f, "(lambda {} {})", name, body),
                }
            }
            ExprKind::If { cond, then, els } => write!(f, "(if {} {} {})", cond, then, els),
            ExprKind::Define { name, value } => write!(f, "(define {} {})", name, value),
            ExprKind::Quote(datum) => write!(f, "'{}", datum),
            ExprKind::Let { bindings, body } => {
                write!(f, "(let (")?;
                for (i, (name, def)) in bindings.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "({} {})", name, def)?;
                }
                write!(f, ") {})", body)
            }
            ExprKind::Cond { clauses } => {
                write!(f, "(cond")?;
                for clause in clauses {
                    match clause {
                        CondClause::Test(t, e) => write!(f, " ({} {})", t, e)?,
                        CondClause::Else(e) => write!(f, " (else {})", e)?,
                    }
                }
                write!(f, ")")
            }
            ExprKind::Case { key, clauses, default } => {
                write!(f, "(case {}", key)?;
                for (datums, e) in clauses {
                    write!(f, " ((")?;
                    for (i, d) in datums.iter().enumerate() {
                        if i > 0 {
                            write!(f, " ")?;
                        }
                        write!(f, "{}", d)?;
                    }
                    write!(f, ") {})", e)?;
                }
                if let Some(e) = default {
                    write!(f, " (else {})", e)?;
                }
                write!(f, ")")
            }
        }
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

/// Structural equality on trees, ignoring node ids and positions. Reals
/// compare by bits so printing and reparsing is an exact round trip.
pub fn expr_eq(a: &Expr, b: &Expr) -> bool {
    match (a.kind(), b.kind()) {
        (ExprKind::Bool(x), ExprKind::Bool(y)) => x == y,
        (ExprKind::Int(x), ExprKind::Int(y)) => x == y,
        (ExprKind::Real(x), ExprKind::Real(y)) => x.to_bits() == y.to_bits(),
        (ExprKind::Char(x), ExprKind::Char(y)) => x == y,
        (ExprKind::Nil, ExprKind::Nil) => true,
        (ExprKind::Var(x), ExprKind::Var(y)) => x == y,
        (ExprKind::App(xs), ExprKind::App(ys)) => {
            xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| expr_eq(x, y))
        }
        (
            ExprKind::Lambda { formals: fa, body: ba },
            ExprKind::Lambda { formals: fb, body: bb },
        ) => {
            let formals_eq = match (fa, fb) {
                (Formals::Fixed(x), Formals::Fixed(y)) => x == y,
                (Formals::Variadic(x), Formals::Variadic(y)) => x == y,
                _ => false,
            };
            formals_eq && expr_eq(ba, bb)
        }
        (ExprKind::If { cond: ca, then: ta, els: ea }, ExprKind::If { cond: cb, then: tb, els: eb }) => {
            expr_eq(ca, cb) && expr_eq(ta, tb) && expr_eq(ea, eb)
        }
        (ExprKind::Define { name: na, value: va }, ExprKind::Define { name: nb, value: vb }) => {
            na == nb && expr_eq(va, vb)
        }
        (ExprKind::Quote(x), ExprKind::Quote(y)) => expr_eq(x, y),
        (ExprKind::Let { bindings: xa, body: ba }, ExprKind::Let { bindings: xb, body: bb }) => {
            xa.len() == xb.len()
                && xa
                    .iter()
                    .zip(xb)
                    .all(|((n1, e1), (n2, e2))| n1 == n2 && expr_eq(e1, e2))
                && expr_eq(ba, bb)
        }
        (ExprKind::Cond { clauses: ca }, ExprKind::Cond { clauses: cb }) => {
            ca.len() == cb.len()
                && ca.iter().zip(cb).all(|(x, y)| match (x, y) {
                    (CondClause::Test(t1, e1), CondClause::Test(t2, e2)) => {
                        expr_eq(t1, t2) && expr_eq(e1, e2)
                    }
                    (CondClause::Else(e1), CondClause::Else(e2)) => expr_eq(e1, e2),
                    _ => false,
                })
        }
        (
            ExprKind::Case { key: ka, clauses: ca, default: da },
            ExprKind::Case { key: kb, clauses: cb, default: db },
        ) => {
            expr_eq(ka, kb)
                && ca.len() == cb.len()
                && ca.iter().zip(cb).all(|((d1, e1), (d2, e2))| {
                    d1.len() == d2.len()
                        && d1.iter().zip(d2).all(|(x, y)| expr_eq(x, y))
                        && expr_eq(e1, e2)
                })
                && match (da, db) {
                    (None, None) => true,
                    (Some(x), Some(y)) => expr_eq(x, y),
                    _ => false,
                }
        }
        _ => false,
    }
}
