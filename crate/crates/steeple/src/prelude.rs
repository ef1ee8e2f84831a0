//! The derived-procedure prelude and the bundled example models.

use std::env;
use std::fs;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::eval::{core_environment, EvalContext};
use crate::expr::NodeIdGen;
use crate::reader::read_program_with;
use crate::trace::Driver;
use crate::value::Environment;

pub const PRELUDE: &str = include_str!("../church/prelude.church");

/// Environment variable naming a directory to load fixtures from instead of
/// the embedded copies.
pub const FIXTURE_DIR_VAR: &str = "STEEPLE_FIXTURE_DIR";

const FIXTURES: &[(&str, &str)] = &[
    ("two-flip", include_str!("../church/fixtures/two-flip.church")),
    ("sprinkler", include_str!("../church/fixtures/sprinkler.church")),
    (
        "sprinkler-hyperprior",
        include_str!("../church/fixtures/sprinkler-hyperprior.church"),
    ),
    ("sprinkler-dp", include_str!("../church/fixtures/sprinkler-dp.church")),
    ("geometric", include_str!("../church/fixtures/geometric.church")),
    (
        "mixture-binomial-small",
        include_str!("../church/fixtures/mixture-binomial-small.church"),
    ),
    (
        "infinite-mixture-binomial",
        include_str!("../church/fixtures/infinite-mixture-binomial.church"),
    ),
    (
        "gaussian-mixture",
        include_str!("../church/fixtures/gaussian-mixture.church"),
    ),
    (
        "gaussian-mixture-obs",
        include_str!("../church/fixtures/gaussian-mixture-obs.church"),
    ),
    ("irm", include_str!("../church/fixtures/irm.church")),
    ("pcfg", include_str!("../church/fixtures/pcfg.church")),
    ("adapted-pcfg", include_str!("../church/fixtures/adapted-pcfg.church")),
    ("ihmm", include_str!("../church/fixtures/ihmm.church")),
    ("ipcfg", include_str!("../church/fixtures/ipcfg.church")),
    ("red-light", include_str!("../church/fixtures/red-light.church")),
];

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("unknown fixture '{name}'; known fixtures: {known}")]
    Unknown { name: String, known: String },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub fn fixture_names() -> Vec<&'static str> {
    FIXTURES.iter().map(|(name, _)| *name).collect()
}

/// Source text of a bundled model. With `STEEPLE_FIXTURE_DIR` set, reads
/// `<dir>/<name>.church` from disk instead, so fixtures can be overridden
/// without rebuilding.
pub fn fixture_source(name: &str) -> Result<String, FixtureError> {
    if let Ok(dir) = env::var(FIXTURE_DIR_VAR) {
        let path = PathBuf::from(dir).join(format!("{}.church", name));
        return fs::read_to_string(&path).map_err(|source| FixtureError::Io {
            path: path.display().to_string(),
            source,
        });
    }
    FIXTURES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, src)| (*src).to_string())
        .ok_or_else(|| FixtureError::Unknown {
            name: name.to_string(),
            known: fixture_names().join(", "),
        })
}

/// The core bindings plus the prelude, ready for a program to run in. Returns
/// the id generator used for the prelude so callers can keep parsing with it;
/// ids stay unique across the prelude and everything parsed afterwards.
pub fn standard_global_env() -> (Environment, NodeIdGen) {
    let mut ids = NodeIdGen::new();
    let forms = read_program_with(PRELUDE, &mut ids).expect("prelude parses");
    let env = core_environment();
    let mut ctx = EvalContext::new(Driver::Sample, ChaCha8Rng::seed_from_u64(0), ids);
    for (i, form) in forms.iter().enumerate() {
        let value = ctx
            .run_form(i as u32, form, &env)
            .expect("prelude evaluates");
        assert!(!value.is_error(), "prelude form {} evaluates to error", i);
    }
    (env, ctx.ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::{display_value, values_equal, Value};

    fn eval_str(src: &str, env: &Environment, ids: NodeIdGen, seed: u64) -> (Value, NodeIdGen) {
        let mut ids = ids;
        let forms = read_program_with(src, &mut ids).unwrap();
        let mut ctx = EvalContext::new(Driver::Sample, ChaCha8Rng::seed_from_u64(seed), ids);
        let mut last = Value::Nil;
        for (i, form) in forms.iter().enumerate() {
            last = ctx.run_form(i as u32, form, env).unwrap();
        }
        (last, ctx.ids)
    }

    #[test]
    fn prelude_defines_the_list_utilities() {
        let (env, _) = standard_global_env();
        for name in [
            "map", "fold", "length", "sum", "eq?", "member?", "append", "list-ref", "take",
            "drop", "last", "second", "third", "range", "repeat", "all?", "any?", "noisy-or",
            "unfold", "adapted-unfold", "make-100-sided-die", "sb-DPmem",
        ] {
            assert!(
                matches!(env.lookup(name), Some(Value::Proc(_))),
                "{} missing",
                name
            );
        }
    }

    #[test]
    fn list_utilities_behave() {
        let (env, ids) = standard_global_env();
        let cases = [
            ("(sum (range 1 5))", "10"),
            ("(map (lambda (x) (* x x)) '(1 2 3))", "(1 4 9)"),
            ("(fold + 0 '(1 2 3 4))", "10"),
            ("(append '(1 2) '(3))", "(1 2 3)"),
            ("(take '(a b c) 2)", "(a b)"),
            ("(drop '(a b c) 2)", "(c)"),
            ("(member? 'b '(a b c))", "true"),
            ("(member? 'z '(a b c))", "false"),
            ("(list-ref '(a b c) 1)", "b"),
            ("(last '(a b c))", "c"),
            ("(second '(a b c))", "b"),
            ("(third '(a b c))", "c"),
            ("(length (repeat 3 (lambda () 1)))", "3"),
            ("(all? (lambda (x) (> x 0)) '(1 2 3))", "true"),
            ("(all? (lambda (x) (> x 0)) '(1 -2 3))", "false"),
            ("(any? (lambda (x) (> x 0)) '(-1 -2 3))", "true"),
            ("(any? (lambda (x) (> x 0)) '(-1 -2))", "false"),
        ];
        let mut ids = ids;
        for (src, expect) in cases {
            let (value, next) = eval_str(src, &env, ids, 7);
            ids = next;
            assert_eq!(display_value(&value), expect, "{}", src);
        }
    }

    #[test]
    fn unfold_expands_until_the_program_says_terminal() {
        // terminal? is resolved late, against the global frame, so a program
        // can define it after the prelude has already been loaded.
        let (env, ids) = standard_global_env();
        let src = "(define (terminal? s) (not (= s 'S)))
                   (define (expand s) '(a b))
                   (unfold expand 'S)";
        let (value, _) = eval_str(src, &env, ids, 1);
        assert_eq!(display_value(&value), "(a b)");
    }

    #[test]
    fn the_hundred_sided_die_rolls_integers_in_range() {
        let (env, ids) = standard_global_env();
        let src = "(define roll (make-100-sided-die)) (repeat 50 roll)";
        let (value, _) = eval_str(src, &env, ids, 5);
        let items = value.list_items().unwrap();
        assert_eq!(items.len(), 50);
        for v in &items {
            match v {
                Value::Int(n) => assert!((1..=100).contains(n), "rolled {}", n),
                other => panic!("die rolled {}", display_value(other)),
            }
        }
    }

    #[test]
    fn noisy_or_deterministic_corners() {
        let (env, ids) = standard_global_env();
        let (on, ids) = eval_str("(noisy-or true 1.0 false 0.5 0.0)", &env, ids, 3);
        assert!(matches!(on, Value::Bool(true)));
        let (off, _) = eval_str("(noisy-or false 0.7 false 0.7 0.0)", &env, ids, 3);
        assert!(matches!(off, Value::Bool(false)));
    }

    #[test]
    fn stick_breaking_memoizer_with_tiny_alpha_acts_like_mem() {
        let (env, ids) = standard_global_env();
        let src = "(define f (sb-DPmem 1e-6 (lambda (x) (normal 0.0 1.0))))
                   (list (f 'a) (f 'a) (f 'b) (f 'b))";
        let (value, _) = eval_str(src, &env, ids, 11);
        let items = value.list_items().unwrap();
        assert_eq!(items.len(), 4);
        assert!(!items[0].is_error());
        assert!(values_equal(&items[0], &items[1]));
        assert!(values_equal(&items[2], &items[3]));
        assert!(!values_equal(&items[0], &items[2]));
    }

    #[test]
    fn every_fixture_parses() {
        for name in fixture_names() {
            let source = fixture_source(name).unwrap();
            let mut ids = NodeIdGen::new();
            let forms = read_program_with(&source, &mut ids)
                .unwrap_or_else(|e| panic!("{}: {}", name, e));
            assert!(!forms.is_empty(), "{} is empty", name);
        }
    }

    #[test]
    fn unknown_fixture_reports_the_known_names() {
        let err = fixture_source("no-such-model").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("no-such-model"));
        assert!(msg.contains("two-flip"));
        assert!(msg.contains("red-light"));
    }
}
