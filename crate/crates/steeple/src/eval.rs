//! The evaluator. An expression denotes a sampler, and evaluating it draws
//! one value; everything else in the crate is a different policy for
//! resolving the random choices that come up along the way.
//!
//! Failures of a computation (bad arity, wrong argument types, unbound
//! variables, invalid distribution parameters) yield the contagious `error`
//! value rather than aborting: strict operations over `error` are `error`.
//! Mechanical limits — recursion depth, enumeration bounds — surface as
//! [`Fault`]s instead and abort the run.

use std::rc::Rc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::erp::ErpKind;
use crate::expr::{Expr, ExprKind, Formals, NodeIdGen, Symbol};
use crate::memo::MemoState;
use crate::reader::read_program_with;
use crate::trace::{Address, Driver, Fault, Frame};
use crate::value::{
    display_value, key_string, DpMemoProc, Environment, LambdaProc, MemoProc, PrimOp, Procedure,
    Value,
};

pub const DEFAULT_MAX_DEPTH: usize = 2000;

/// Attempt budget for `query` forms evaluated inside a model.
pub const NESTED_QUERY_ATTEMPTS: u64 = 1_000_000;

pub struct EvalContext {
    pub driver: Driver,
    pub rng: ChaCha8Rng,
    pub memo: MemoState,
    /// Fresh node ids for expressions built at run time (`eval`). Starts
    /// past the program's own ids so lambda identities never collide.
    pub ids: NodeIdGen,
    path: Vec<Frame>,
    gensym_counter: u64,
    depth: usize,
    max_depth: usize,
    evals: usize,
}

impl EvalContext {
    pub fn new(driver: Driver, rng: ChaCha8Rng, ids: NodeIdGen) -> EvalContext {
        EvalContext {
            driver,
            rng,
            memo: MemoState::new(),
            ids,
            path: Vec::new(),
            gensym_counter: 0,
            depth: 0,
            max_depth: DEFAULT_MAX_DEPTH,
            evals: 0,
        }
    }

    pub fn with_max_depth(mut self, max_depth: usize) -> EvalContext {
        self.max_depth = max_depth;
        self
    }

    /// Evaluate one top-level form under its own address root.
    pub fn run_form(&mut self, index: u32, form: &Expr, env: &Environment) -> Result<Value, Fault> {
        self.path.clear();
        self.path.push(Frame::Top(index));
        let result = self.evaluate(form, env);
        self.path.clear();
        result
    }

    /// Recursion on the Rust stack mirrors recursion in the program, so grow
    /// the stack in segments rather than trusting the thread's allowance;
    /// `max_depth` stays the only limit on runaway programs. Probing the
    /// stack on every expression costs real time, so probe on a stride: any
    /// descent of 32 levels passes a multiple of 32 and gets checked, and
    /// the red zone is sized for the frames a stride can add.
    pub fn evaluate(&mut self, expr: &Expr, env: &Environment) -> Result<Value, Fault> {
        self.evals = self.evals.wrapping_add(1);
        if self.evals % 32 == 0 {
            stacker::maybe_grow(512 * 1024, 4 * 1024 * 1024, || self.eval_expr(expr, env))
        } else {
            self.eval_expr(expr, env)
        }
    }

    fn eval_expr(&mut self, expr: &Expr, env: &Environment) -> Result<Value, Fault> {
        match expr.kind() {
            ExprKind::Bool(b) => Ok(Value::Bool(*b)),
            ExprKind::Int(n) => Ok(Value::Int(*n)),
            ExprKind::Real(x) => Ok(Value::Real(*x)),
            ExprKind::Char(c) => Ok(Value::Char(*c)),
            ExprKind::Nil => Ok(Value::Nil),
            ExprKind::Var(name) => Ok(env.lookup(name).unwrap_or(Value::Error)),
            ExprKind::Quote(datum) => Ok(datum_to_value(datum)),
            ExprKind::Lambda { formals, body } => {
                Ok(Value::Proc(Procedure::Lambda(Rc::new(LambdaProc {
                    lambda_id: expr.id(),
                    formals: formals.clone(),
                    body: body.clone(),
                    env: env.clone(),
                    birth: Address::capture(&self.path),
                }))))
            }
            ExprKind::If { cond, then, els } => {
                match self.eval_at(Frame::Arg(0), cond, env)? {
                    Value::Bool(true) => self.eval_at(Frame::Arg(1), then, env),
                    Value::Bool(false) => self.eval_at(Frame::Arg(2), els, env),
                    _ => Ok(Value::Error),
                }
            }
            ExprKind::Define { name, value } => {
                let v = self.eval_at(Frame::Arg(0), value, env)?;
                env.define_here(name.clone(), v);
                Ok(Value::Env(env.clone()))
            }
            ExprKind::App(parts) => self.eval_application(parts, env),
            // Sugar is rewritten away by the reader; running it is misuse.
            ExprKind::Let { .. } | ExprKind::Cond { .. } | ExprKind::Case { .. } => {
                Ok(Value::Error)
            }
        }
    }

    fn eval_at(&mut self, frame: Frame, expr: &Expr, env: &Environment) -> Result<Value, Fault> {
        self.path.push(frame);
        let result = self.evaluate(expr, env);
        self.path.pop();
        result
    }

    fn eval_application(&mut self, parts: &[Expr], env: &Environment) -> Result<Value, Fault> {
        let op = self.eval_at(Frame::Arg(0), &parts[0], env)?;
        // Query forms keep their operands unevaluated: the definitions and
        // the condition are syntax for a separate inference run.
        if let Value::Proc(Procedure::Primitive(prim)) = &op {
            if matches!(prim, PrimOp::Query | PrimOp::LexQuery) {
                return self.eval_nested_query(*prim, &parts[1..], env);
            }
        }
        let mut args = Vec::with_capacity(parts.len() - 1);
        for (i, part) in parts[1..].iter().enumerate() {
            args.push(self.eval_at(Frame::Arg(i as u32 + 1), part, env)?);
        }
        match op {
            Value::Proc(p) => self.apply(&p, &args),
            _ => Ok(Value::Error),
        }
    }

    pub fn apply(&mut self, proc: &Procedure, args: &[Value]) -> Result<Value, Fault> {
        if self.depth >= self.max_depth {
            return Err(Fault::DepthLimit { limit: self.max_depth });
        }
        self.depth += 1;
        let result = self.apply_inner(proc, args);
        self.depth -= 1;
        result
    }

    fn apply_inner(&mut self, proc: &Procedure, args: &[Value]) -> Result<Value, Fault> {
        match proc {
            Procedure::Lambda(lp) => {
                let bindings = match bind_formals(&lp.formals, args) {
                    Some(b) => b,
                    None => return Ok(Value::Error),
                };
                let call_env = lp.env.extend(bindings);
                self.eval_at(Frame::Body(lp.lambda_id), &lp.body, &call_env)
            }
            Procedure::Erp(kind) => {
                if args.iter().any(Value::is_error) || kind.validate(args).is_err() {
                    return Ok(Value::Error);
                }
                self.resolve_choice(*kind, args)
            }
            Procedure::Primitive(op) => self.apply_primitive(*op, args),
            Procedure::Memoized(mp) => {
                let mp = mp.clone();
                self.apply_memoized(&mp, args)
            }
            Procedure::DpMemoized(dp) => {
                let dp = dp.clone();
                self.apply_dp_memoized(&dp, args)
            }
            Procedure::Gensym(tag) => match args {
                [v] => Ok(Value::Bool(
                    matches!(v, Value::Proc(Procedure::Gensym(t)) if t == tag),
                )),
                _ => Ok(Value::Error),
            },
        }
    }

    fn resolve_choice(&mut self, erp: ErpKind, params: &[Value]) -> Result<Value, Fault> {
        // Only the trace-keeping drivers pay for capturing the address.
        match &mut self.driver {
            Driver::Sample => Ok(erp.sample(params, &mut self.rng).expect("validated params")),
            Driver::Enumerate(state) => state.resolve(erp, params),
            Driver::Record(builder) => {
                let addr = Address::capture(&self.path);
                builder.resolve(addr, erp, params, &mut self.rng)
            }
            Driver::Replay(replay) => {
                let addr = Address::capture(&self.path);
                replay.resolve(addr, erp, params, &mut self.rng)
            }
        }
    }

    /// Run `f` in a fresh address namespace rooted at `frame`.
    fn in_namespace<T>(
        &mut self,
        frame: Frame,
        f: impl FnOnce(&mut EvalContext) -> Result<T, Fault>,
    ) -> Result<T, Fault> {
        let saved = std::mem::replace(&mut self.path, vec![frame]);
        let result = f(self);
        self.path = saved;
        result
    }

    fn apply_memoized(&mut self, mp: &MemoProc, args: &[Value]) -> Result<Value, Fault> {
        let key = key_of_args(args);
        if let Some(cached) = self.memo.lookup(&mp.birth, &key) {
            return Ok(cached);
        }
        let frame = Frame::Memo { birth: mp.birth.clone(), key: key.clone() };
        let value = self.in_namespace(frame, |ctx| ctx.apply(&mp.inner, args))?;
        self.memo.store(mp.birth.clone(), key, value.clone());
        Ok(value)
    }

    fn apply_dp_memoized(&mut self, dp: &DpMemoProc, args: &[Value]) -> Result<Value, Fault> {
        let key = key_of_args(args);
        let (counts, seq) = {
            let restaurant = self.memo.restaurant_mut(&dp.birth, &key);
            let seq = restaurant.seatings;
            restaurant.seatings += 1;
            (restaurant.counts(), seq)
        };
        let params = [
            Value::list(counts.iter().map(|&c| Value::Int(c as i64)).collect::<Vec<_>>()),
            Value::Real(dp.alpha),
        ];
        let seat_frame = Frame::DpSeat { birth: dp.birth.clone(), key: key.clone(), seq };
        let seat = self.in_namespace(seat_frame, |ctx| ctx.resolve_choice(ErpKind::CrpSeat, &params))?;
        let table = match seat {
            Value::Int(t) if t >= 0 && (t as usize) <= counts.len() => t as usize,
            _ => return Ok(Value::Error),
        };
        if table < counts.len() {
            let restaurant = self.memo.restaurant_mut(&dp.birth, &key);
            restaurant.tables[table].count += 1;
            return Ok(restaurant.tables[table].dish.clone());
        }
        let dish_frame =
            Frame::DpDish { birth: dp.birth.clone(), key: key.clone(), table: table as u32 };
        let dish = self.in_namespace(dish_frame, |ctx| ctx.apply(&dp.inner, args))?;
        let restaurant = self.memo.restaurant_mut(&dp.birth, &key);
        restaurant.tables.push(crate::memo::TableState { count: 1, dish: dish.clone() });
        Ok(dish)
    }

    fn eval_nested_query(
        &mut self,
        prim: PrimOp,
        parts: &[Expr],
        env: &Environment,
    ) -> Result<Value, Fault> {
        if !matches!(self.driver, Driver::Sample) {
            return Err(Fault::NestedQuery);
        }
        let style = if prim == PrimOp::LexQuery {
            crate::infer::QueryStyle::Lexical
        } else {
            crate::infer::QueryStyle::Expression
        };
        let problem = match crate::infer::QueryProblem::from_parts(style, parts, &mut self.ids) {
            Ok(p) => p,
            Err(_) => return Ok(Value::Error),
        };
        let seed = self.rng.gen::<u64>();
        match crate::infer::rejection_sample(&problem, env, &self.ids, seed, NESTED_QUERY_ATTEMPTS)
        {
            Ok(outcome) => Ok(outcome.value),
            Err(crate::infer::InferenceError::BudgetExceeded { .. }) => {
                Err(Fault::NestedQueryBudget)
            }
            Err(crate::infer::InferenceError::Fault(f)) => Err(f),
            Err(_) => Ok(Value::Error),
        }
    }

    fn apply_primitive(&mut self, op: PrimOp, args: &[Value]) -> Result<Value, Fault> {
        if args.iter().any(Value::is_error) {
            return Ok(Value::Error);
        }
        Ok(match op {
            PrimOp::Pair => match args {
                [a, b] => Value::pair(a.clone(), b.clone()),
                _ => Value::Error,
            },
            PrimOp::First => match args {
                [Value::Pair(cell)] => cell.0.clone(),
                _ => Value::Error,
            },
            PrimOp::Rest => match args {
                [Value::Pair(cell)] => cell.1.clone(),
                _ => Value::Error,
            },
            PrimOp::List => Value::list(args.to_vec()),
            PrimOp::IsNull => unary(args, |v| Value::Bool(matches!(v, Value::Nil))),
            PrimOp::IsPair => unary(args, |v| Value::Bool(matches!(v, Value::Pair(_)))),
            PrimOp::IsSymbol => unary(args, |v| Value::Bool(matches!(v, Value::Symbol(_)))),
            PrimOp::IsBoolean => unary(args, |v| Value::Bool(matches!(v, Value::Bool(_)))),
            PrimOp::IsChar => unary(args, |v| Value::Bool(matches!(v, Value::Char(_)))),
            PrimOp::IsProcedure => unary(args, |v| Value::Bool(matches!(v, Value::Proc(_)))),
            PrimOp::IsNumber | PrimOp::IsReal => {
                unary(args, |v| Value::Bool(matches!(v, Value::Int(_) | Value::Real(_))))
            }
            PrimOp::IsInteger => unary(args, |v| {
                Value::Bool(match v {
                    Value::Int(_) => true,
                    Value::Real(x) => x.fract() == 0.0 && x.is_finite(),
                    _ => false,
                })
            }),
            PrimOp::Add => fold_numeric(args, Value::Int(0), |a, b| a.add(b)),
            PrimOp::Mul => fold_numeric(args, Value::Int(1), |a, b| a.mul(b)),
            PrimOp::Sub => match args {
                [] => Value::Error,
                [x] => Numeric::of(x).map_or(Value::Error, |n| {
                    Numeric::Int(0).sub(n).map_or(Value::Error, Numeric::into_value)
                }),
                [x, rest @ ..] => match Numeric::of(x) {
                    Some(first) => rest
                        .iter()
                        .try_fold(first, |acc, v| Numeric::of(v).and_then(|n| acc.sub(n)))
                        .map_or(Value::Error, Numeric::into_value),
                    None => Value::Error,
                },
            },
            PrimOp::Div => match args {
                [] => Value::Error,
                [x] => divide(&Value::Int(1), x),
                [x, rest @ ..] => {
                    let mut acc = x.clone();
                    let mut out = Value::Error;
                    for (i, v) in rest.iter().enumerate() {
                        out = divide(&acc, v);
                        if out.is_error() {
                            break;
                        }
                        if i + 1 < rest.len() {
                            acc = out.clone();
                        }
                    }
                    out
                }
            },
            PrimOp::Abs => match args {
                [Value::Int(n)] => n.checked_abs().map_or(Value::Error, Value::Int),
                [Value::Real(x)] => Value::Real(x.abs()),
                _ => Value::Error,
            },
            PrimOp::Less => compare(args, |a, b| a < b),
            PrimOp::Greater => compare(args, |a, b| a > b),
            PrimOp::LessEq => compare(args, |a, b| a <= b),
            PrimOp::GreaterEq => compare(args, |a, b| a >= b),
            PrimOp::NumEq => match args {
                [a, b] => Value::Bool(crate::value::values_equal(a, b)),
                _ => Value::Error,
            },
            PrimOp::Not => match args {
                [Value::Bool(b)] => Value::Bool(!b),
                _ => Value::Error,
            },
            PrimOp::And => bool_fold(args, true, |a, b| a && b),
            PrimOp::Or => bool_fold(args, false, |a, b| a || b),
            PrimOp::Eval => match args {
                [datum, Value::Env(env)] => {
                    let env = env.clone();
                    let printed = display_value(datum);
                    match read_program_with(&printed, &mut self.ids) {
                        Ok(forms) if forms.len() == 1 => {
                            return self.eval_at(Frame::EvalBody, &forms[0], &env);
                        }
                        _ => Value::Error,
                    }
                }
                _ => Value::Error,
            },
            PrimOp::Apply => match args {
                [Value::Proc(p), rest] => match rest.list_items() {
                    Some(items) => {
                        let p = p.clone();
                        return self.apply(&p, &items);
                    }
                    None => Value::Error,
                },
                _ => Value::Error,
            },
            PrimOp::Mem => match args {
                [Value::Proc(p)] => Value::Proc(Procedure::Memoized(Rc::new(MemoProc {
                    inner: p.clone(),
                    birth: Address::capture(&self.path),
                }))),
                _ => Value::Error,
            },
            PrimOp::DpMem => match args {
                [alpha, Value::Proc(p)] => match alpha.as_number() {
                    Some(a) if a >= 0.0 && a.is_finite() => {
                        Value::Proc(Procedure::DpMemoized(Rc::new(DpMemoProc {
                            alpha: a,
                            inner: p.clone(),
                            birth: Address::capture(&self.path),
                        })))
                    }
                    _ => Value::Error,
                },
                _ => Value::Error,
            },
            PrimOp::GensymNew => {
                self.gensym_counter += 1;
                Value::Proc(Procedure::Gensym(self.gensym_counter))
            }
            // Only meaningful in operator position, where the application
            // rule intercepts them before their operands are evaluated.
            PrimOp::Query | PrimOp::LexQuery => Value::Error,
        })
    }
}

/// Core bindings: primitives, the elementary random procedures, and the
/// `error` constant. No derived procedures; those come from the prelude.
pub fn core_bindings() -> Vec<(Symbol, Value)> {
    let prims = [
        PrimOp::Pair,
        PrimOp::First,
        PrimOp::Rest,
        PrimOp::List,
        PrimOp::IsNull,
        PrimOp::IsPair,
        PrimOp::IsSymbol,
        PrimOp::IsBoolean,
        PrimOp::IsNumber,
        PrimOp::IsInteger,
        PrimOp::IsReal,
        PrimOp::IsChar,
        PrimOp::IsProcedure,
        PrimOp::Add,
        PrimOp::Sub,
        PrimOp::Mul,
        PrimOp::Div,
        PrimOp::Abs,
        PrimOp::Less,
        PrimOp::Greater,
        PrimOp::LessEq,
        PrimOp::GreaterEq,
        PrimOp::NumEq,
        PrimOp::Not,
        PrimOp::And,
        PrimOp::Or,
        PrimOp::Eval,
        PrimOp::Apply,
        PrimOp::Query,
        PrimOp::LexQuery,
        PrimOp::Mem,
        PrimOp::DpMem,
        PrimOp::GensymNew,
    ];
    let erps = [
        ErpKind::Flip,
        ErpKind::Random,
        ErpKind::Beta,
        ErpKind::Normal,
        ErpKind::Multinomial,
        ErpKind::UniformDraw,
    ];
    let mut bindings: Vec<(Symbol, Value)> = Vec::new();
    for prim in prims {
        bindings.push((prim.name().into(), Value::Proc(Procedure::Primitive(prim))));
    }
    for erp in erps {
        bindings.push((erp.name().into(), Value::Proc(Procedure::Erp(erp))));
    }
    bindings.push(("error".into(), Value::Error));
    bindings
}

/// An environment with just the core bindings in its single frame.
pub fn core_environment() -> Environment {
    let env = Environment::new();
    for (name, value) in core_bindings() {
        env.define_here(name, value);
    }
    env
}

/// Quoted data as a runtime value: lists stay lists, names become symbols.
pub fn datum_to_value(datum: &Expr) -> Value {
    match datum.kind() {
        ExprKind::Bool(b) => Value::Bool(*b),
        ExprKind::Int(n) => Value::Int(*n),
        ExprKind::Real(x) => Value::Real(*x),
        ExprKind::Char(c) => Value::Char(*c),
        ExprKind::Nil => Value::Nil,
        ExprKind::Var(name) => Value::Symbol(name.clone()),
        ExprKind::App(items) => {
            Value::list(items.iter().map(datum_to_value).collect::<Vec<_>>())
        }
        ExprKind::Quote(inner) => {
            Value::list(vec![Value::symbol("quote"), datum_to_value(inner)])
        }
        _ => Value::Error,
    }
}

fn key_of_args(args: &[Value]) -> Rc<str> {
    key_string(&Value::list(args.to_vec())).into()
}

fn bind_formals(formals: &Formals, args: &[Value]) -> Option<Vec<(Symbol, Value)>> {
    match formals {
        Formals::Fixed(names) => {
            if names.len() != args.len() {
                return None;
            }
            Some(names.iter().cloned().zip(args.iter().cloned()).collect())
        }
        Formals::Variadic(name) => Some(vec![(name.clone(), Value::list(args.to_vec()))]),
    }
}

#[derive(Clone, Copy)]
enum Numeric {
    Int(i64),
    Real(f64),
}

impl Numeric {
    fn of(v: &Value) -> Option<Numeric> {
        match v {
            Value::Int(n) => Some(Numeric::Int(*n)),
            Value::Real(x) => Some(Numeric::Real(*x)),
            _ => None,
        }
    }

    fn into_value(self) -> Value {
        match self {
            Numeric::Int(n) => Value::Int(n),
            Numeric::Real(x) => Value::Real(x),
        }
    }

    fn as_f64(self) -> f64 {
        match self {
            Numeric::Int(n) => n as f64,
            Numeric::Real(x) => x,
        }
    }

    fn add(self, other: Numeric) -> Option<Numeric> {
        match (self, other) {
            (Numeric::Int(a), Numeric::Int(b)) => a.checked_add(b).map(Numeric::Int),
            (a, b) => Some(Numeric::Real(a.as_f64() + b.as_f64())),
        }
    }

    fn sub(self, other: Numeric) -> Option<Numeric> {
        match (self, other) {
            (Numeric::Int(a), Numeric::Int(b)) => a.checked_sub(b).map(Numeric::Int),
            (a, b) => Some(Numeric::Real(a.as_f64() - b.as_f64())),
        }
    }

    fn mul(self, other: Numeric) -> Option<Numeric> {
        match (self, other) {
            (Numeric::Int(a), Numeric::Int(b)) => a.checked_mul(b).map(Numeric::Int),
            (a, b) => Some(Numeric::Real(a.as_f64() * b.as_f64())),
        }
    }
}

fn fold_numeric(
    args: &[Value],
    unit: Value,
    op: impl Fn(Numeric, Numeric) -> Option<Numeric>,
) -> Value {
    let mut acc = Numeric::of(&unit).expect("numeric unit");
    for v in args {
        acc = match Numeric::of(v).and_then(|n| op(acc, n)) {
            Some(n) => n,
            None => return Value::Error,
        };
    }
    // `(+)` is 0 and `(*)` is 1, but any real operand makes the result real.
    if args.iter().all(|v| matches!(v, Value::Int(_))) {
        acc.into_value()
    } else {
        Value::Real(acc.as_f64())
    }
}

fn divide(a: &Value, b: &Value) -> Value {
    match (a.as_number(), b.as_number()) {
        (Some(x), Some(y)) if y != 0.0 => Value::Real(x / y),
        _ => Value::Error,
    }
}

fn compare(args: &[Value], op: impl Fn(f64, f64) -> bool) -> Value {
    match args {
        [a, b] => match (a.as_number(), b.as_number()) {
            (Some(x), Some(y)) => Value::Bool(op(x, y)),
            _ => Value::Error,
        },
        _ => Value::Error,
    }
}

fn bool_fold(args: &[Value], unit: bool, op: impl Fn(bool, bool) -> bool) -> Value {
    let mut acc = unit;
    for v in args {
        match v {
            Value::Bool(b) => acc = op(acc, *b),
            _ => return Value::Error,
        }
    }
    Value::Bool(acc)
}

fn unary(args: &[Value], f: impl Fn(&Value) -> Value) -> Value {
    match args {
        [v] => f(v),
        _ => Value::Error,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn run_all(src: &str, seed: u64) -> Vec<Value> {
        let mut ids = NodeIdGen::new();
        let forms = read_program_with(src, &mut ids).unwrap();
        let env = core_environment().child();
        let mut ctx = EvalContext::new(Driver::Sample, ChaCha8Rng::seed_from_u64(seed), ids);
        forms
            .iter()
            .enumerate()
            .map(|(i, f)| ctx.run_form(i as u32, f, &env).unwrap())
            .collect()
    }

    fn run_last(src: &str, seed: u64) -> Value {
        run_all(src, seed).pop().unwrap()
    }

    fn shows(src: &str, seed: u64) -> String {
        display_value(&run_last(src, seed))
    }

    #[test]
    fn arithmetic_and_application() {
        assert_eq!(shows("(+ 1 2 3)", 0), "6");
        assert_eq!(shows("((lambda (x y) (* x (+ y 1))) 2 3)", 0), "8");
        assert_eq!(shows("(/ 1 2)", 0), "0.5");
        assert_eq!(shows("(- 5)", 0), "-5");
        assert_eq!(shows("(+ 1 2.5)", 0), "3.5");
        assert_eq!(shows("(< 1 2)", 0), "true");
        assert_eq!(shows("(abs -4)", 0), "4");
        assert_eq!(shows("(/ 1 0)", 0), "error");
    }

    #[test]
    fn if_is_strict_about_booleans_and_lazy_about_branches() {
        assert_eq!(shows("(if true 1 2)", 0), "1");
        assert_eq!(shows("(if false 1 2)", 0), "2");
        assert_eq!(shows("(if 1 2 3)", 0), "error");
        // The untaken branch would error if it ran.
        assert_eq!(shows("(if true 1 (first 5))", 0), "1");
    }

    #[test]
    fn define_binds_and_returns_the_environment() {
        let results = run_all("(define x 21) (+ x x)", 0);
        assert!(matches!(results[0], Value::Env(_)));
        assert_eq!(display_value(&results[1]), "42");
    }

    #[test]
    fn quotation_yields_plain_data() {
        assert_eq!(shows("'(a 1 2.5 (b))", 0), "(a 1 2.5 (b))");
        assert_eq!(shows("(first '(1 2))", 0), "1");
        assert_eq!(shows("''a", 0), "(quote a)");
        assert_eq!(shows("(pair 1 2)", 0), "(1 . 2)");
    }

    #[test]
    fn failures_are_contagious_errors() {
        assert_eq!(shows("nosuch", 0), "error");
        assert_eq!(shows("(+ 1 (first 5))", 0), "error");
        assert_eq!(shows("(5 1)", 0), "error");
        assert_eq!(shows("((lambda (x) x) 1 2)", 0), "error");
        assert_eq!(shows("(flip 2.0)", 0), "error");
        assert_eq!(shows("(not 1)", 0), "error");
        assert_eq!(shows("(and true 1)", 0), "error");
        // A lambda may carry an error value through untouched.
        assert_eq!(shows("((lambda (x) 7) nosuch)", 0), "7");
    }

    #[test]
    fn variadic_lambdas_collect_their_arguments() {
        assert_eq!(shows("((lambda xs xs) 1 2 3)", 0), "(1 2 3)");
        assert_eq!(shows("((lambda xs xs))", 0), "()");
    }

    #[test]
    fn recursion_through_the_defining_frame() {
        let src = "(define fact (lambda (n) (if (= n 0) 1 (* n (fact (- n 1))))))
                   (fact 10)";
        assert_eq!(shows(src, 0), "3628800");
    }

    #[test]
    fn runaway_recursion_faults() {
        let mut ids = NodeIdGen::new();
        let forms =
            read_program_with("((lambda (f) (f f)) (lambda (f) (f f)))", &mut ids).unwrap();
        let env = core_environment().child();
        let mut ctx = EvalContext::new(Driver::Sample, ChaCha8Rng::seed_from_u64(0), ids)
            .with_max_depth(50);
        let err = ctx.run_form(0, &forms[0], &env);
        assert!(matches!(err, Err(Fault::DepthLimit { limit: 50 })));
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let src = "(list (flip) (random) (normal 0 1) (uniform-draw '(a b c)))";
        assert_eq!(shows(src, 9), shows(src, 9));
        let different = (0..20).any(|s| shows(src, s) != shows(src, s + 100));
        assert!(different);
    }

    #[test]
    fn let_and_cond_run_after_desugaring() {
        assert_eq!(shows("(let ((a 2) (b 3)) (+ a b))", 0), "5");
        let src = "(let ((x 2)) (cond ((= x 1) 'one) ((= x 2) 'two) (else 'other)))";
        assert_eq!(shows(src, 0), "two");
        let case = "(let ((x 'b)) (case x ((a) 1) ((b c) 2) (else 3)))";
        assert_eq!(shows(case, 0), "2");
    }

    #[test]
    fn mem_caches_per_arguments_within_a_run() {
        assert_eq!(shows("(define f (mem flip)) (= (f) (f))", 3), "true");
        let same = "(define g (mem (lambda (x) (random)))) (= (g 1) (g 1))";
        let cross = "(define g (mem (lambda (x) (random)))) (= (g 1) (g 2))";
        for seed in 0..50 {
            assert_eq!(shows(same, seed), "true");
            assert_eq!(shows(cross, seed), "false");
        }
    }

    #[test]
    fn dpmem_at_zero_concentration_collapses_to_mem() {
        let src = "(define f (DPmem 0.0 (lambda (x) (random)))) (= (f 1) (f 1))";
        for seed in 0..50 {
            assert_eq!(shows(src, seed), "true");
        }
    }

    #[test]
    fn dpmem_at_huge_concentration_never_shares() {
        let src = "(define f (DPmem 1000000000.0 (lambda (x) (random)))) (= (f 1) (f 1))";
        for seed in 0..50 {
            assert_eq!(shows(src, seed), "false");
        }
    }

    #[test]
    fn gensyms_are_fresh_tags() {
        assert_eq!(shows("(= (gensym) (gensym))", 0), "false");
        assert_eq!(shows("((lambda (g) (= g g)) (gensym))", 0), "true");
        assert_eq!(shows("((lambda (g) (g g)) (gensym))", 0), "true");
        assert_eq!(shows("((gensym) (gensym))", 0), "false");
        assert_eq!(shows("(symbol? (gensym))", 0), "false");
        assert_eq!(shows("(procedure? (gensym))", 0), "true");
    }

    #[test]
    fn eval_runs_data_in_an_environment_value() {
        assert_eq!(shows("((lambda (e) (eval '(+ 1 2) e)) (define ignored 0))", 0), "3");
        let closure = "((lambda (e) (eval '((lambda (n) (* n n)) x) e)) (define x 7))";
        assert_eq!(shows(closure, 0), "49");
        assert_eq!(shows("(eval '(+ 1 2) 5)", 0), "error");
    }

    #[test]
    fn apply_spreads_a_list_of_arguments() {
        assert_eq!(shows("(apply + '(1 2 3))", 0), "6");
        assert_eq!(shows("(apply (lambda (a b) (list b a)) '(1 2))", 0), "(2 1)");
        assert_eq!(shows("(apply + 5)", 0), "error");
    }

    #[test]
    fn nested_query_samples_the_conditional() {
        let src = "(query (define x (flip)) x x)";
        for seed in 0..10 {
            assert_eq!(shows(src, seed), "true");
        }
    }

    #[test]
    fn memoized_erps_inside_models() {
        // One flip shared by reference, fresh flips otherwise.
        let shared = "(define d (mem (lambda (i) (flip))))
                      (list (= (d 0) (d 0)) (boolean? (d 1)))";
        assert_eq!(shows(shared, 4), "(true true)");
    }
}
