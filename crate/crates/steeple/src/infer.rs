//! Conditional inference over models: rejection sampling, exact enumeration
//! of finite models, and single-site Metropolis–Hastings over computation
//! traces. All three consume the same [`QueryProblem`] and differ only in
//! the driver they run the model under.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::eval::EvalContext;
use crate::expr::{Expr, ExprKind, NodeIdGen, Position};
use crate::trace::{ComputationTrace, Driver, EnumState, Fault, ReplayState, TraceBuilder};
use crate::value::{display_value, Environment, Value};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum QueryStyle {
    /// `(query defines... expression condition)`
    Expression,
    /// `(lex-query defines... (name...) condition)`: the result is the list
    /// of those variables' values.
    Lexical,
}

/// A conditional sampling problem: run the definitions, accept the world if
/// the condition comes out true, and report the query expression's value.
#[derive(Clone, Debug)]
pub struct QueryProblem {
    pub defines: Vec<Expr>,
    pub query: Expr,
    pub condition: Expr,
}

#[derive(Error, Debug, Clone)]
#[error("{pos}: {message}")]
pub struct ProblemError {
    pub pos: Position,
    pub message: String,
}

fn problem_error(pos: Position, message: impl Into<String>) -> ProblemError {
    ProblemError { pos, message: message.into() }
}

#[derive(Debug)]
pub enum QueryRun {
    Accepted(Value),
    Rejected,
}

impl QueryProblem {
    /// Interpret the operand forms of a query: definitions, then the query
    /// part, then the condition.
    pub fn from_parts(
        style: QueryStyle,
        parts: &[Expr],
        ids: &mut NodeIdGen,
    ) -> Result<QueryProblem, ProblemError> {
        let pos = parts.first().map(Expr::pos).unwrap_or_default();
        if parts.len() < 2 {
            return Err(problem_error(pos, "expected a query part and a condition"));
        }
        let condition = parts[parts.len() - 1].clone();
        let query_part = &parts[parts.len() - 2];
        let defines = parts[..parts.len() - 2].to_vec();
        for d in &defines {
            if !matches!(d.kind(), ExprKind::Define { .. }) {
                return Err(problem_error(
                    d.pos(),
                    "only definitions may precede the query part",
                ));
            }
        }
        if matches!(condition.kind(), ExprKind::Define { .. }) {
            return Err(problem_error(condition.pos(), "the condition cannot be a definition"));
        }
        let query = match style {
            QueryStyle::Expression => query_part.clone(),
            QueryStyle::Lexical => {
                let names = match query_part.kind() {
                    ExprKind::App(items) => items
                        .iter()
                        .map(|e| match e.kind() {
                            ExprKind::Var(name) => Ok(name.clone()),
                            _ => Err(problem_error(
                                e.pos(),
                                "lex-query expects a list of variable names",
                            )),
                        })
                        .collect::<Result<Vec<_>, _>>()?,
                    ExprKind::Var(name) => vec![name.clone()],
                    _ => {
                        return Err(problem_error(
                            query_part.pos(),
                            "lex-query expects a list of variable names",
                        ))
                    }
                };
                let at = query_part.pos();
                let mut items =
                    vec![Expr::new(ids.fresh(), at, ExprKind::Var("list".into()))];
                for name in names {
                    items.push(Expr::new(ids.fresh(), at, ExprKind::Var(name)));
                }
                Expr::new(ids.fresh(), at, ExprKind::App(items))
            }
        };
        Ok(QueryProblem { defines, query, condition })
    }

    /// One execution of the model in `env`: definitions first, then the
    /// condition, and the query expression only in accepted worlds. The
    /// top-level address roots are fixed by position, so traces of different
    /// executions line up.
    pub fn run(&self, ctx: &mut EvalContext, env: &Environment) -> Result<QueryRun, Fault> {
        for (i, d) in self.defines.iter().enumerate() {
            ctx.run_form(i as u32, d, env)?;
        }
        let cond = ctx.run_form(self.defines.len() as u32, &self.condition, env)?;
        if !cond.is_true() {
            return Ok(QueryRun::Rejected);
        }
        let value = ctx.run_form(self.defines.len() as u32 + 1, &self.query, env)?;
        Ok(QueryRun::Accepted(value))
    }
}

/// Recognize a top-level `(query ...)` or `(lex-query ...)` form by name.
pub fn split_query_form(form: &Expr) -> Option<(QueryStyle, &[Expr])> {
    match form.kind() {
        ExprKind::App(parts) => match parts.first()?.kind() {
            ExprKind::Var(name) if &**name == "query" => {
                Some((QueryStyle::Expression, &parts[1..]))
            }
            ExprKind::Var(name) if &**name == "lex-query" => {
                Some((QueryStyle::Lexical, &parts[1..]))
            }
            _ => None,
        },
        _ => None,
    }
}

#[derive(Error, Debug)]
pub enum InferenceError {
    #[error("no accepted world within {attempts} attempts ({completed} samples done)")]
    BudgetExceeded { attempts: u64, completed: usize },
    #[error("the condition admits no probability mass")]
    InadmissibleConditioning,
    #[error("model cannot be enumerated: {0}")]
    UnsupportedModel(String),
    #[error(transparent)]
    Fault(#[from] Fault),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

#[derive(Debug)]
pub struct RejectionOutcome {
    pub value: Value,
    /// Worlds sampled to get this value, the accepted one included.
    pub attempts: u64,
}

/// Draw one conditional sample by plain rejection.
pub fn rejection_sample(
    problem: &QueryProblem,
    env: &Environment,
    base_ids: &NodeIdGen,
    seed: u64,
    max_attempts: u64,
) -> Result<RejectionOutcome, InferenceError> {
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    rejection_sample_from(problem, env, base_ids, &mut master, max_attempts, 0)
}

fn rejection_sample_from(
    problem: &QueryProblem,
    env: &Environment,
    base_ids: &NodeIdGen,
    master: &mut ChaCha8Rng,
    max_attempts: u64,
    completed: usize,
) -> Result<RejectionOutcome, InferenceError> {
    for attempt in 1..=max_attempts {
        let rng = ChaCha8Rng::seed_from_u64(master.gen());
        let mut ctx = EvalContext::new(Driver::Sample, rng, base_ids.clone());
        let run_env = env.child();
        match problem.run(&mut ctx, &run_env)? {
            QueryRun::Accepted(value) => return Ok(RejectionOutcome { value, attempts: attempt }),
            QueryRun::Rejected => {}
        }
    }
    Err(InferenceError::BudgetExceeded { attempts: max_attempts, completed })
}

#[derive(Clone, Debug)]
pub struct RejectionConfig {
    pub samples: usize,
    pub seed: u64,
    /// Attempt budget per returned sample.
    pub max_attempts: u64,
}

impl Default for RejectionConfig {
    fn default() -> Self {
        RejectionConfig { samples: 1000, seed: 0, max_attempts: 1_000_000 }
    }
}

pub fn rejection_query(
    problem: &QueryProblem,
    env: &Environment,
    base_ids: &NodeIdGen,
    cfg: &RejectionConfig,
) -> Result<Vec<RejectionOutcome>, InferenceError> {
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.samples);
    for _ in 0..cfg.samples {
        let outcome = rejection_sample_from(
            problem,
            env,
            base_ids,
            &mut master,
            cfg.max_attempts,
            out.len(),
        )?;
        out.push(outcome);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug)]
pub struct EnumLimits {
    /// Abandon a path once it has made this many choices.
    pub max_choices: usize,
    /// Abandon branches whose path probability falls to or below this.
    pub min_path_prob: f64,
}

impl Default for EnumLimits {
    fn default() -> Self {
        EnumLimits { max_choices: 64, min_path_prob: 0.0 }
    }
}

#[derive(Debug)]
pub struct EnumerationResult {
    /// Conditional outcomes sorted by printed value.
    pub entries: Vec<(Value, f64)>,
    /// Share of the conditional left unresolved by the bounds.
    pub residual: f64,
    /// Raw prior mass accounted for across all paths; 1 up to float error
    /// whenever the model is fully covered.
    pub total_mass: f64,
    pub accepted_paths: u64,
    pub rejected_paths: u64,
    pub abandoned_paths: u64,
}

impl EnumerationResult {
    /// Probability of the entry printing as `shown`, zero if absent.
    pub fn probability_of(&self, shown: &str) -> f64 {
        self.entries
            .iter()
            .find(|(v, _)| display_value(v) == shown)
            .map(|(_, p)| *p)
            .unwrap_or(0.0)
    }
}

/// Exhaustively explore every choice path of the model, splitting the prior
/// mass into accepted, rejected and abandoned parts, and report the
/// conditional distribution of the query expression.
pub fn enumerate_query(
    problem: &QueryProblem,
    env: &Environment,
    base_ids: &NodeIdGen,
    limits: &EnumLimits,
) -> Result<EnumerationResult, InferenceError> {
    let mut stack: Vec<Vec<Value>> = vec![Vec::new()];
    let mut accepted: BTreeMap<String, (Value, f64)> = BTreeMap::new();
    let mut accepted_mass = 0.0;
    let mut rejected_mass = 0.0;
    let mut residual = 0.0;
    let mut accepted_paths = 0u64;
    let mut rejected_paths = 0u64;
    let mut abandoned_paths = 0u64;
    while let Some(prefix) = stack.pop() {
        let state = EnumState::new(prefix, limits.min_path_prob, limits.max_choices);
        let mut ctx = EvalContext::new(
            Driver::Enumerate(state),
            ChaCha8Rng::seed_from_u64(0),
            base_ids.clone(),
        );
        let run_env = env.child();
        let outcome = problem.run(&mut ctx, &run_env);
        let state = match ctx.driver {
            Driver::Enumerate(s) => s,
            _ => unreachable!("driver does not change"),
        };
        residual += state.residual;
        stack.extend(state.pending.iter().cloned());
        match outcome {
            Ok(QueryRun::Accepted(value)) => {
                let mass = state.log_prob().exp();
                accepted_mass += mass;
                accepted_paths += 1;
                accepted
                    .entry(display_value(&value))
                    .and_modify(|e| e.1 += mass)
                    .or_insert((value, mass));
            }
            Ok(QueryRun::Rejected) => {
                rejected_mass += state.log_prob().exp();
                rejected_paths += 1;
            }
            Err(Fault::Truncated) => {
                abandoned_paths += 1;
            }
            Err(Fault::ContinuousChoice { erp }) => {
                return Err(InferenceError::UnsupportedModel(format!(
                    "`{}` has uncountable support",
                    erp
                )));
            }
            Err(f) => return Err(InferenceError::Fault(f)),
        }
    }
    if accepted_mass == 0.0 {
        return Err(InferenceError::InadmissibleConditioning);
    }
    let denom = accepted_mass + residual;
    let entries = accepted
        .into_values()
        .map(|(v, mass)| (v, mass / denom))
        .collect();
    Ok(EnumerationResult {
        entries,
        residual: residual / denom,
        total_mass: accepted_mass + rejected_mass + residual,
        accepted_paths,
        rejected_paths,
        abandoned_paths,
    })
}

/// Enumerate the sampling distribution of `expr` after `defines`, with no
/// condition.
pub fn enumerate_expression(
    defines: Vec<Expr>,
    expr: Expr,
    env: &Environment,
    ids: &mut NodeIdGen,
    limits: &EnumLimits,
) -> Result<EnumerationResult, InferenceError> {
    let pos = expr.pos();
    let condition = Expr::new(ids.fresh(), pos, ExprKind::Bool(true));
    let problem = QueryProblem { defines, query: expr, condition };
    enumerate_query(&problem, env, ids, limits)
}

#[derive(Clone, Debug)]
pub struct MhConfig {
    pub samples: usize,
    pub burn_in: usize,
    /// Chain steps between collected samples; 1 collects every step.
    pub lag: usize,
    pub seed: u64,
    /// Attempt budget for finding the initial accepted world.
    pub max_attempts: u64,
}

impl Default for MhConfig {
    fn default() -> Self {
        MhConfig { samples: 1000, burn_in: 100, lag: 1, seed: 0, max_attempts: 1_000_000 }
    }
}

#[derive(Debug)]
pub struct MhOutcome {
    pub samples: Vec<Value>,
    pub accepted_steps: u64,
    pub total_steps: u64,
}

struct ChainState {
    trace: ComputationTrace,
    value: Value,
    logp: f64,
}

/// Single-site Metropolis–Hastings over computation traces: pick one choice
/// uniformly, resample it from its prior, replay the model reusing every
/// other recorded choice where it still fits, and accept or reject by the
/// usual ratio.
pub fn mh_query(
    problem: &QueryProblem,
    env: &Environment,
    base_ids: &NodeIdGen,
    cfg: &MhConfig,
) -> Result<MhOutcome, InferenceError> {
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = initial_state(problem, env, base_ids, &mut master, cfg.max_attempts)?;
    let mut accepted_steps = 0u64;
    let mut total_steps = 0u64;
    let lag = cfg.lag.max(1);
    let mut samples = Vec::with_capacity(cfg.samples);
    let advance = |state: &mut ChainState,
                       master: &mut ChaCha8Rng,
                       accepted_steps: &mut u64,
                       total_steps: &mut u64|
     -> Result<(), InferenceError> {
        *total_steps += 1;
        if let Some(next) = mh_step(state, problem, env, base_ids, master)? {
            *state = next;
            *accepted_steps += 1;
        }
        Ok(())
    };
    for _ in 0..cfg.burn_in {
        advance(&mut state, &mut master, &mut accepted_steps, &mut total_steps)?;
    }
    for _ in 0..cfg.samples {
        for _ in 0..lag {
            advance(&mut state, &mut master, &mut accepted_steps, &mut total_steps)?;
        }
        samples.push(state.value.clone());
    }
    Ok(MhOutcome { samples, accepted_steps, total_steps })
}

fn initial_state(
    problem: &QueryProblem,
    env: &Environment,
    base_ids: &NodeIdGen,
    master: &mut ChaCha8Rng,
    max_attempts: u64,
) -> Result<ChainState, InferenceError> {
    for _ in 0..max_attempts {
        let world = master.gen::<u64>();
        // Probe without bookkeeping first; under a rare condition nearly
        // every world is thrown away, so only the accepted one (re-run on
        // the same world seed) pays for recording its trace.
        let mut probe =
            EvalContext::new(Driver::Sample, ChaCha8Rng::seed_from_u64(world), base_ids.clone());
        if matches!(problem.run(&mut probe, &env.child())?, QueryRun::Rejected) {
            continue;
        }
        let rng = ChaCha8Rng::seed_from_u64(world);
        let mut ctx =
            EvalContext::new(Driver::Record(TraceBuilder::default()), rng, base_ids.clone());
        let run_env = env.child();
        let outcome = problem.run(&mut ctx, &run_env)?;
        if let QueryRun::Accepted(value) = outcome {
            let trace = match ctx.driver {
                Driver::Record(builder) => builder.into_trace(),
                _ => unreachable!("driver does not change"),
            };
            let logp = trace.log_prob();
            return Ok(ChainState { trace, value, logp });
        }
    }
    Err(InferenceError::BudgetExceeded { attempts: max_attempts, completed: 0 })
}

fn mh_step(
    state: &ChainState,
    problem: &QueryProblem,
    env: &Environment,
    base_ids: &NodeIdGen,
    master: &mut ChaCha8Rng,
) -> Result<Option<ChainState>, InferenceError> {
    let n = state.trace.len();
    if n == 0 {
        // A deterministic model has a single possible trace.
        return Ok(None);
    }
    let picked_addr = state.trace.nth_address(master.gen_range(0..n)).expect("in range").clone();
    let picked = state.trace.choices[&picked_addr].clone();
    let mut constraints = state.trace.choices.clone();
    constraints.remove(&picked_addr);

    let rng = ChaCha8Rng::seed_from_u64(master.gen());
    let mut ctx =
        EvalContext::new(Driver::Replay(ReplayState::new(constraints)), rng, base_ids.clone());
    let run_env = env.child();
    let outcome = problem.run(&mut ctx, &run_env)?;
    let replay = match ctx.driver {
        Driver::Replay(r) => r,
        _ => unreachable!("driver does not change"),
    };
    let value = match outcome {
        QueryRun::Accepted(v) => v,
        QueryRun::Rejected => return Ok(None),
    };
    let fresh = replay.fresh_logp();
    let stale = picked.logp + replay.stale_logp();
    let trace = replay.into_trace();
    let logp = trace.log_prob();
    let n_new = trace.len();
    if n_new == 0 || logp == f64::NEG_INFINITY {
        return Ok(None);
    }
    let ln_ratio = (logp - state.logp) + (stale - fresh) + ((n as f64) / (n_new as f64)).ln();
    // Reused choices rescore bitwise identically, so the first two terms
    // cancel and the ratio is the trace-size correction alone.
    debug_assert!(((logp - state.logp) - (fresh - stale)).abs() < 1e-9);
    if master.gen::<f64>().ln() < ln_ratio {
        Ok(Some(ChainState { trace, value, logp }))
    } else {
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::core_environment;
    use crate::reader::read_program_with;
    use crate::value::values_equal;

    fn problem(src: &str) -> (QueryProblem, NodeIdGen, Environment) {
        let mut ids = NodeIdGen::new();
        let forms = read_program_with(src, &mut ids).unwrap();
        assert_eq!(forms.len(), 1, "one query form expected");
        let (style, parts) = split_query_form(&forms[0]).expect("a query form");
        let p = QueryProblem::from_parts(style, parts, &mut ids).unwrap();
        (p, ids, core_environment())
    }

    const TWO_FLIP: &str = "(query (define a (flip)) (define b (flip)) (list a b) (or a b))";

    fn two_flip_exact() -> Vec<(&'static str, f64)> {
        // Joint of two fair flips restricted to the three worlds with a
        // true: each has prior 1/4, so each conditional is 1/3.
        vec![("(false true)", 1.0 / 3.0), ("(true false)", 1.0 / 3.0), ("(true true)", 1.0 / 3.0)]
    }

    #[test]
    fn enumeration_matches_hand_computation() {
        let (p, ids, env) = problem(TWO_FLIP);
        let result = enumerate_query(&p, &env, &ids, &EnumLimits::default()).unwrap();
        assert_eq!(result.entries.len(), 3);
        assert!((result.total_mass - 1.0).abs() < 1e-12);
        assert_eq!(result.residual, 0.0);
        assert_eq!(result.rejected_paths, 1);
        for (shown, expected) in two_flip_exact() {
            assert!((result.probability_of(shown) - expected).abs() < 1e-12, "{}", shown);
        }
    }

    #[test]
    fn enumeration_entries_come_out_sorted() {
        let (p, ids, env) = problem(TWO_FLIP);
        let result = enumerate_query(&p, &env, &ids, &EnumLimits::default()).unwrap();
        let shown: Vec<String> = result.entries.iter().map(|(v, _)| display_value(v)).collect();
        let mut sorted = shown.clone();
        sorted.sort();
        assert_eq!(shown, sorted);
    }

    #[test]
    fn rejection_agrees_with_enumeration() {
        let (p, ids, env) = problem(TWO_FLIP);
        let cfg = RejectionConfig { samples: 3000, seed: 7, ..Default::default() };
        let outcomes = rejection_query(&p, &env, &ids, &cfg).unwrap();
        let mut counts = BTreeMap::new();
        for o in &outcomes {
            *counts.entry(display_value(&o.value)).or_insert(0u64) += 1;
        }
        assert_eq!(counts.len(), 3);
        let observed: Vec<u64> = counts.values().copied().collect();
        let (_stat, p_value) =
            crate::stats::chi_square_gof(&observed, &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        assert!(p_value > 0.001, "p = {}", p_value);
        // Mean attempts per accepted sample is 1/(3/4).
        let mean =
            outcomes.iter().map(|o| o.attempts as f64).sum::<f64>() / outcomes.len() as f64;
        assert!((mean - 4.0 / 3.0).abs() < 0.1, "mean attempts {}", mean);
    }

    #[test]
    fn mh_agrees_with_enumeration() {
        let (p, ids, env) = problem(TWO_FLIP);
        let cfg = MhConfig { samples: 4000, burn_in: 200, lag: 2, seed: 3, ..Default::default() };
        let outcome = mh_query(&p, &env, &ids, &cfg).unwrap();
        assert_eq!(outcome.samples.len(), 4000);
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for v in &outcome.samples {
            *counts.entry(display_value(v)).or_insert(0) += 1;
        }
        let freqs: Vec<f64> =
            counts.values().map(|&c| c as f64 / outcome.samples.len() as f64).collect();
        assert_eq!(freqs.len(), 3);
        let tv = crate::stats::tv_distance(&freqs, &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        assert!(tv < 0.05, "tv = {}", tv);
        assert!(outcome.accepted_steps > 0);
    }

    #[test]
    fn geometric_enumeration_truncates_cleanly() {
        let src = "(define geom (lambda (p) (if (flip p) 0 (+ 1 (geom p))))) (geom 0.5)";
        let mut ids = NodeIdGen::new();
        let forms = read_program_with(src, &mut ids).unwrap();
        let env = core_environment();
        let defines = vec![forms[0].clone()];
        let expr = forms[1].clone();
        let limits = EnumLimits { max_choices: 10, min_path_prob: 0.0 };
        let result =
            enumerate_expression(defines.clone(), expr.clone(), &env, &mut ids, &limits).unwrap();
        assert!((result.total_mass - 1.0).abs() < 1e-12);
        // Values 0..9 at mass 2^-(k+1), the rest unresolved.
        assert_eq!(result.accepted_paths, 10);
        assert!((result.probability_of("0") - 0.5).abs() < 1e-12);
        assert!((result.probability_of("3") - 0.0625).abs() < 1e-12);
        assert!((result.residual - 2f64.powi(-10)).abs() < 1e-15);

        // One more choice of headroom halves what is left unresolved.
        let wider = EnumLimits { max_choices: 11, min_path_prob: 0.0 };
        let result2 = enumerate_expression(defines, expr, &env, &mut ids, &wider).unwrap();
        assert!((result2.residual / result.residual - 0.5).abs() < 1e-12);
    }

    #[test]
    fn min_path_prob_prunes_into_the_residual() {
        let src = "(define geom (lambda (p) (if (flip p) 0 (+ 1 (geom p))))) (geom 0.5)";
        let mut ids = NodeIdGen::new();
        let forms = read_program_with(src, &mut ids).unwrap();
        let env = core_environment();
        let limits = EnumLimits { max_choices: 64, min_path_prob: 0.1 };
        let result =
            enumerate_expression(vec![forms[0].clone()], forms[1].clone(), &env, &mut ids, &limits)
                .unwrap();
        // Paths of probability <= 0.1 are abandoned: only 0 (1/2), 1 (1/4)
        // and 2 (1/8) survive.
        assert_eq!(result.accepted_paths, 3);
        assert!((result.total_mass - 1.0).abs() < 1e-12);
        assert!((result.residual - 0.125).abs() < 1e-12);
    }

    #[test]
    fn impossible_conditions_are_reported() {
        let src = "(query (define x (flip)) x (and x (not x)))";
        let (p, ids, env) = problem(src);
        let err = enumerate_query(&p, &env, &ids, &EnumLimits::default());
        assert!(matches!(err, Err(InferenceError::InadmissibleConditioning)));
        let err = rejection_sample(&p, &env, &ids, 0, 500);
        assert!(matches!(err, Err(InferenceError::BudgetExceeded { attempts: 500, .. })));
    }

    #[test]
    fn continuous_models_cannot_be_enumerated() {
        let src = "(query (define x (random)) x (< x 2))";
        let (p, ids, env) = problem(src);
        let err = enumerate_query(&p, &env, &ids, &EnumLimits::default());
        assert!(matches!(err, Err(InferenceError::UnsupportedModel(_))));
    }

    #[test]
    fn lex_query_reports_named_variables() {
        let src = "(lex-query (define a (flip)) (define b (not a)) (a b) a)";
        let (p, ids, env) = problem(src);
        let result = enumerate_query(&p, &env, &ids, &EnumLimits::default()).unwrap();
        assert_eq!(result.entries.len(), 1);
        assert!((result.probability_of("(true false)") - 1.0).abs() < 1e-12);
    }

    #[test]
    fn malformed_query_forms_are_rejected() {
        let mut ids = NodeIdGen::new();
        let forms = read_program_with("(query (define a 1) (+ a 1) a (flip))", &mut ids).unwrap();
        let (style, parts) = split_query_form(&forms[0]).unwrap();
        // `(+ a 1)` sits where only definitions may.
        assert!(QueryProblem::from_parts(style, parts, &mut ids).is_err());
        let forms = read_program_with("(lex-query (define a 1) (a 1) a)", &mut ids).unwrap();
        let (style, parts) = split_query_form(&forms[0]).unwrap();
        assert!(QueryProblem::from_parts(style, parts, &mut ids).is_err());
    }

    #[test]
    fn replay_with_full_constraints_reproduces_the_trace() {
        let (p, ids, env) = problem(TWO_FLIP);
        let mut master = ChaCha8Rng::seed_from_u64(5);
        let state = initial_state(&p, &env, &ids, &mut master, 1000).unwrap();
        let mut ctx = EvalContext::new(
            Driver::Replay(ReplayState::new(state.trace.choices.clone())),
            ChaCha8Rng::seed_from_u64(99),
            ids.clone(),
        );
        let run_env = env.child();
        let outcome = p.run(&mut ctx, &run_env).unwrap();
        let replay = match ctx.driver {
            Driver::Replay(r) => r,
            _ => unreachable!(),
        };
        assert_eq!(replay.fresh_logp(), 0.0);
        assert_eq!(replay.stale_logp(), 0.0);
        let trace = replay.into_trace();
        assert_eq!(trace.len(), state.trace.len());
        assert_eq!(trace.log_prob(), state.logp);
        match outcome {
            QueryRun::Accepted(v) => assert!(values_equal(&v, &state.value)),
            QueryRun::Rejected => panic!("constrained replay must accept"),
        }
    }

    #[test]
    fn forced_constraints_steer_the_replay() {
        // Pin both flips of the two-flip model by recording a run and
        // overwriting the choice values.
        let (p, ids, env) = problem(TWO_FLIP);
        let mut master = ChaCha8Rng::seed_from_u64(11);
        let state = initial_state(&p, &env, &ids, &mut master, 1000).unwrap();
        let mut constraints = state.trace.choices.clone();
        let wanted = [true, false];
        for (slot, (_, rec)) in constraints.iter_mut().enumerate() {
            rec.value = Value::Bool(wanted[slot]);
        }
        let mut ctx = EvalContext::new(
            Driver::Replay(ReplayState::new(constraints)),
            ChaCha8Rng::seed_from_u64(0),
            ids.clone(),
        );
        let run_env = env.child();
        let outcome = p.run(&mut ctx, &run_env).unwrap();
        match outcome {
            QueryRun::Accepted(v) => assert_eq!(display_value(&v), "(true false)"),
            QueryRun::Rejected => panic!("(true false) satisfies the condition"),
        }
        let replay = match ctx.driver {
            Driver::Replay(r) => r,
            _ => unreachable!(),
        };
        let logp = replay.into_trace().log_prob();
        assert!((logp - 0.25f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn deterministic_models_yield_constant_chains() {
        let src = "(query (define x 4) (+ x 1) (= x 4))";
        let (p, ids, env) = problem(src);
        let cfg = MhConfig { samples: 10, burn_in: 5, ..Default::default() };
        let outcome = mh_query(&p, &env, &ids, &cfg).unwrap();
        assert!(outcome.samples.iter().all(|v| display_value(v) == "5"));
        assert_eq!(outcome.accepted_steps, 0);
    }

    #[test]
    fn nested_queries_are_rejected_outside_sampling() {
        let src = "(query (define x (query (define y (flip)) y y)) x x)";
        let (p, ids, env) = problem(src);
        let err = enumerate_query(&p, &env, &ids, &EnumLimits::default());
        assert!(matches!(err, Err(InferenceError::Fault(Fault::NestedQuery))));
        // Sampling it is fine.
        let got = rejection_sample(&p, &env, &ids, 1, 1000).unwrap();
        assert!(values_equal(&got.value, &Value::Bool(true)));
    }

    #[test]
    fn chains_are_reproducible_by_seed() {
        let (p, ids, env) = problem(TWO_FLIP);
        let cfg = MhConfig { samples: 50, burn_in: 10, seed: 21, ..Default::default() };
        let a = mh_query(&p, &env, &ids, &cfg).unwrap();
        let b = mh_query(&p, &env, &ids, &cfg).unwrap();
        let shown = |o: &MhOutcome| -> Vec<String> {
            o.samples.iter().map(display_value).collect()
        };
        assert_eq!(shown(&a), shown(&b));
        assert_eq!(a.accepted_steps, b.accepted_steps);
    }
}
