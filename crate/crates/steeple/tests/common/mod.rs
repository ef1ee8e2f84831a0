#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use steeple::expr::NodeIdGen;
use steeple::infer::{split_query_form, QueryProblem};
use steeple::trace::Fault;
use steeple::value::Environment;
use steeple::{fixture_source, read_program_with, standard_global_env, Driver, EvalContext, Value};

/// Run a fixture start to finish as one sampled execution, returning the
/// value of its last form. Forms are evaluated straight into the global
/// frame, mirroring the script runner, so a fixture's own `terminal?` (or any
/// other redefinition) is visible to the prelude procedures that use it.
pub fn forward_sample(name: &str, seed: u64) -> Result<Value, Fault> {
    let (env, mut ids) = standard_global_env();
    let source = fixture_source(name).unwrap();
    let forms = read_program_with(&source, &mut ids).unwrap();
    let mut ctx = EvalContext::new(Driver::Sample, ChaCha8Rng::seed_from_u64(seed), ids);
    let mut last = Value::Nil;
    for (i, form) in forms.iter().enumerate() {
        last = ctx.run_form(i as u32, form, &env)?;
    }
    Ok(last)
}

pub struct LoadedForward {
    pub env: Environment,
    pub ids: NodeIdGen,
    pub last: steeple::expr::Expr,
}

impl LoadedForward {
    /// Re-sample the fixture's final form in a fresh context; the loaded
    /// definitions are shared, per-run memo state is not.
    pub fn sample(&self, seed: u64) -> Result<Value, Fault> {
        self.sample_with_depth(seed, steeple::DEFAULT_MAX_DEPTH)
    }

    pub fn sample_with_depth(&self, seed: u64, max_depth: usize) -> Result<Value, Fault> {
        let mut ctx =
            EvalContext::new(Driver::Sample, ChaCha8Rng::seed_from_u64(seed), self.ids.clone())
                .with_max_depth(max_depth);
        ctx.run_form(1000, &self.last, &self.env)
    }
}

/// Load a fixture once: evaluate everything but the final form into the
/// global frame and hand back that form for repeated sampling. Cheaper than
/// re-reading the prelude for every draw.
pub fn load_forward_fixture(name: &str) -> LoadedForward {
    let (env, mut ids) = standard_global_env();
    let source = fixture_source(name).unwrap();
    let forms = read_program_with(&source, &mut ids).unwrap();
    let (last, defines) = forms.split_last().expect("fixture is nonempty");
    let mut ctx = EvalContext::new(Driver::Sample, ChaCha8Rng::seed_from_u64(0), ids);
    for (i, form) in defines.iter().enumerate() {
        ctx.run_form(i as u32, form, &env).expect("fixture definition evaluates");
    }
    LoadedForward { env, ids: ctx.ids, last: last.clone() }
}

pub struct LoadedQuery {
    pub problem: QueryProblem,
    pub env: Environment,
    pub ids: NodeIdGen,
}

/// Load a fixture whose last form is a query. Leading top-level definitions
/// are evaluated once into the global frame (they are expected to be
/// deterministic, binding closures and constants); only the definitions
/// inside the query form itself are re-run per sampled world.
pub fn load_query_fixture(name: &str) -> LoadedQuery {
    let source = fixture_source(name).unwrap();
    load_query_program(&source)
}

pub fn load_query_program(source: &str) -> LoadedQuery {
    let (env, mut ids) = standard_global_env();
    let forms = read_program_with(source, &mut ids).unwrap();
    let (style, parts) = split_query_form(forms.last().expect("program is nonempty"))
        .expect("program ends in a query form");
    let problem = QueryProblem::from_parts(style, parts, &mut ids).unwrap();
    let mut ctx = EvalContext::new(Driver::Sample, ChaCha8Rng::seed_from_u64(0), ids);
    for (i, form) in forms[..forms.len() - 1].iter().enumerate() {
        ctx.run_form(i as u32, form, &env).expect("top-level form evaluates");
    }
    LoadedQuery { problem, env, ids: ctx.ids }
}
