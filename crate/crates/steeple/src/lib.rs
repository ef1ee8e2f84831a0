//! An interpreter and inference engine for a stochastic dialect of Scheme.
//!
//! Programs denote distributions: evaluating one draws a sample, and the
//! [`infer`] module answers conditional queries over that distribution by
//! rejection sampling, exact enumeration, or Metropolis-Hastings over
//! execution traces. Random choices are addressed by their position in the
//! evaluation tree so a partial trace can be replayed, and `mem` / `DPmem`
//! give deterministic and stochastic memoization of arbitrary procedures.

pub mod erp;
pub mod eval;
pub mod expr;
pub mod infer;
pub mod memo;
pub mod prelude;
pub mod reader;
pub mod stats;
pub mod trace;
pub mod value;

pub use erp::ErpKind;
pub use eval::{core_environment, EvalContext, DEFAULT_MAX_DEPTH};
pub use infer::{
    enumerate_expression, enumerate_query, mh_query, rejection_query, rejection_sample,
    EnumLimits, EnumerationResult, InferenceError, MhConfig, MhOutcome, QueryProblem, QueryStyle,
    RejectionConfig,
};
pub use prelude::{fixture_names, fixture_source, standard_global_env, PRELUDE};
pub use reader::{input_is_incomplete, read_expr, read_program, read_program_with, ReadError};
pub use trace::{Address, ChoiceRecord, ComputationTrace, Driver, Fault};
pub use value::{display_value, values_equal, Environment, Procedure, Value};
