//! Load a program, hand it to the requested inference routine, and print the
//! results. A program is a sequence of definitions followed by one final
//! form: either a `query`/`lex-query` form or a plain expression, which runs
//! as an unconditioned query.

use std::io::{self, Write};

use serde_json::json;

use steeple::expr::{Expr, ExprKind, NodeIdGen};
use steeple::infer::{split_query_form, RejectionOutcome};
use steeple::{
    display_value, enumerate_query, mh_query, rejection_query, EnumLimits, EnumerationResult,
    Environment, MhConfig, MhOutcome, QueryProblem, RejectionConfig,
};

use crate::{CliError, Method};

#[derive(Clone)]
pub struct RunSettings {
    pub method: Method,
    pub samples: usize,
    pub burn_in: usize,
    pub lag: usize,
    pub seed: u64,
    pub max_choices: usize,
    pub min_path_prob: f64,
    pub max_attempts: u64,
    pub format: OutputFormat,
}

#[derive(Clone, Copy)]
pub enum OutputFormat {
    Jsonl,
    Csv,
    Summary,
}

pub fn run_program(label: &str, source: &str, s: &RunSettings) -> Result<(), CliError> {
    let (env, mut ids) = steeple::standard_global_env();
    let forms = steeple::read_program_with(source, &mut ids)?;
    let (problem, conditioned) = build_problem(forms, &mut ids)?;

    let stdout = io::stdout().lock();
    let mut out = io::BufWriter::new(stdout);
    run_problem(&mut out, label, &problem, conditioned, &env, &ids, s)?;
    out.flush()?;
    Ok(())
}

/// Answer one query problem with the configured method and print the results.
pub fn run_problem(
    out: &mut impl Write,
    label: &str,
    problem: &QueryProblem,
    conditioned: bool,
    env: &Environment,
    ids: &NodeIdGen,
    s: &RunSettings,
) -> Result<(), CliError> {
    match s.method {
        Method::Rejection => {
            let cfg = RejectionConfig {
                samples: s.samples,
                seed: s.seed,
                max_attempts: s.max_attempts,
            };
            let outcomes = rejection_query(problem, env, ids, &cfg)?;
            write_rejection(out, label, s, conditioned, &outcomes)?;
        }
        Method::Mh => {
            let cfg = MhConfig {
                samples: s.samples,
                burn_in: s.burn_in,
                lag: s.lag,
                seed: s.seed,
                max_attempts: s.max_attempts,
            };
            let outcome = mh_query(problem, env, ids, &cfg)?;
            write_chain(out, label, s, conditioned, &outcome)?;
        }
        Method::Enumerate => {
            let limits = EnumLimits {
                max_choices: s.max_choices,
                min_path_prob: s.min_path_prob,
            };
            let result = enumerate_query(problem, env, ids, &limits)?;
            write_enumeration(out, label, s, conditioned, &result)?;
        }
    }
    Ok(())
}

/// Check the shape of a program and turn it into a query problem. The second
/// part of the result says whether the program carried its own condition.
pub fn build_problem(
    forms: Vec<Expr>,
    ids: &mut NodeIdGen,
) -> Result<(QueryProblem, bool), CliError> {
    let Some(last) = forms.last() else {
        return Err(CliError::Usage("the program is empty".to_string()));
    };
    for form in &forms[..forms.len() - 1] {
        if !matches!(form.kind(), ExprKind::Define { .. }) {
            return Err(CliError::Usage(format!(
                "{}: only definitions may precede the final form",
                form.pos()
            )));
        }
    }
    if let Some((style, parts)) = split_query_form(last) {
        let inner = QueryProblem::from_parts(style, parts, ids)?;
        let mut defines = forms[..forms.len() - 1].to_vec();
        defines.extend(inner.defines);
        return Ok((QueryProblem { defines, ..inner }, true));
    }
    if matches!(last.kind(), ExprKind::Define { .. }) {
        return Err(CliError::Usage(format!(
            "{}: the final form must be an expression or a query",
            last.pos()
        )));
    }
    let condition = Expr::new(ids.fresh(), last.pos(), ExprKind::Bool(true));
    let problem = QueryProblem {
        defines: forms[..forms.len() - 1].to_vec(),
        query: last.clone(),
        condition,
    };
    Ok((problem, false))
}

fn header(label: &str, s: &RunSettings, conditioned: bool) -> serde_json::Value {
    let mut head = json!({
        "type": "run",
        "source": label,
        "method": s.method.to_string(),
        "conditioned": conditioned,
    });
    let extra = match s.method {
        Method::Rejection => json!({
            "samples": s.samples,
            "seed": s.seed,
            "max_attempts": s.max_attempts,
        }),
        Method::Mh => json!({
            "samples": s.samples,
            "burn_in": s.burn_in,
            "lag": s.lag,
            "seed": s.seed,
            "max_attempts": s.max_attempts,
        }),
        Method::Enumerate => json!({
            "max_choices": s.max_choices,
            "min_path_prob": s.min_path_prob,
        }),
    };
    let head_map = head.as_object_mut().expect("header is an object");
    for (k, v) in extra.as_object().expect("extras are an object") {
        head_map.insert(k.clone(), v.clone());
    }
    head
}

fn write_rejection(
    out: &mut impl Write,
    label: &str,
    s: &RunSettings,
    conditioned: bool,
    outcomes: &[RejectionOutcome],
) -> io::Result<()> {
    let total_attempts: u64 = outcomes.iter().map(|o| o.attempts).sum();
    let rate = if total_attempts == 0 {
        0.0
    } else {
        outcomes.len() as f64 / total_attempts as f64
    };
    match s.format {
        OutputFormat::Jsonl => {
            writeln!(out, "{}", header(label, s, conditioned))?;
            for o in outcomes {
                let row = json!({
                    "type": "sample",
                    "value": display_value(&o.value),
                    "attempts": o.attempts,
                });
                writeln!(out, "{}", row)?;
            }
            let summary = json!({
                "type": "summary",
                "samples": outcomes.len(),
                "total_attempts": total_attempts,
                "acceptance_rate": rate,
            });
            writeln!(out, "{}", summary)?;
        }
        OutputFormat::Csv => {
            writeln!(out, "value,attempts")?;
            for o in outcomes {
                writeln!(out, "{},{}", display_value(&o.value), o.attempts)?;
            }
        }
        OutputFormat::Summary => {
            writeln!(
                out,
                "{} samples (rejection, seed {})",
                outcomes.len(),
                s.seed
            )?;
            write_frequencies(out, outcomes.iter().map(|o| display_value(&o.value)))?;
            writeln!(
                out,
                "accepted 1 in {:.2} attempts on average",
                if outcomes.is_empty() { 0.0 } else { total_attempts as f64 / outcomes.len() as f64 }
            )?;
        }
    }
    Ok(())
}

fn write_chain(
    out: &mut impl Write,
    label: &str,
    s: &RunSettings,
    conditioned: bool,
    outcome: &MhOutcome,
) -> io::Result<()> {
    let rate = if outcome.total_steps == 0 {
        0.0
    } else {
        outcome.accepted_steps as f64 / outcome.total_steps as f64
    };
    match s.format {
        OutputFormat::Jsonl => {
            writeln!(out, "{}", header(label, s, conditioned))?;
            for v in &outcome.samples {
                let row = json!({ "type": "sample", "value": display_value(v) });
                writeln!(out, "{}", row)?;
            }
            let summary = json!({
                "type": "summary",
                "samples": outcome.samples.len(),
                "accepted_steps": outcome.accepted_steps,
                "total_steps": outcome.total_steps,
                "acceptance_rate": rate,
            });
            writeln!(out, "{}", summary)?;
        }
        OutputFormat::Csv => {
            writeln!(out, "value")?;
            for v in &outcome.samples {
                writeln!(out, "{}", display_value(v))?;
            }
        }
        OutputFormat::Summary => {
            writeln!(
                out,
                "{} samples (chain, seed {}, burn-in {}, lag {})",
                outcome.samples.len(),
                s.seed,
                s.burn_in,
                s.lag,
            )?;
            write_frequencies(out, outcome.samples.iter().map(display_value))?;
            writeln!(
                out,
                "moved on {} of {} proposals ({:.3})",
                outcome.accepted_steps, outcome.total_steps, rate
            )?;
        }
    }
    Ok(())
}

fn write_enumeration(
    out: &mut impl Write,
    label: &str,
    s: &RunSettings,
    conditioned: bool,
    result: &EnumerationResult,
) -> io::Result<()> {
    match s.format {
        OutputFormat::Jsonl => {
            writeln!(out, "{}", header(label, s, conditioned))?;
            for (value, p) in &result.entries {
                let row = json!({
                    "type": "entry",
                    "value": display_value(value),
                    "probability": p,
                });
                writeln!(out, "{}", row)?;
            }
            let summary = json!({
                "type": "summary",
                "entries": result.entries.len(),
                "residual": result.residual,
                "total_mass": result.total_mass,
                "accepted_paths": result.accepted_paths,
                "rejected_paths": result.rejected_paths,
                "abandoned_paths": result.abandoned_paths,
            });
            writeln!(out, "{}", summary)?;
        }
        OutputFormat::Csv => {
            writeln!(out, "value,probability")?;
            for (value, p) in &result.entries {
                writeln!(out, "{},{}", display_value(value), p)?;
            }
        }
        OutputFormat::Summary => {
            writeln!(out, "{} outcomes (enumeration)", result.entries.len())?;
            for (value, p) in &result.entries {
                writeln!(out, "  {:.6}  {}", p, display_value(value))?;
            }
            writeln!(
                out,
                "residual {:.6}, prior mass covered {:.6}",
                result.residual, result.total_mass
            )?;
        }
    }
    Ok(())
}

/// Aggregate printed values into a frequency table, most common first and
/// alphabetical among ties.
pub fn write_frequencies(
    out: &mut impl Write,
    values: impl Iterator<Item = String>,
) -> io::Result<()> {
    let mut counts: std::collections::BTreeMap<String, usize> = Default::default();
    let mut total = 0usize;
    for v in values {
        *counts.entry(v).or_insert(0) += 1;
        total += 1;
    }
    let mut rows: Vec<(String, usize)> = counts.into_iter().collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    for (value, n) in rows {
        writeln!(out, "  {:.4}  {:>6}  {}", n as f64 / total as f64, n, value)?;
    }
    Ok(())
}
