//! Interactive session. Definitions accumulate in one persistent environment
//! and one persistent evaluation context, so memoized procedures keep their
//! tables across inputs. Query forms run inference against the accumulated
//! definitions and always print a summary table; each query re-runs its own
//! world, so values sampled interactively are not conditioned on.

use std::io::{self, BufRead, BufWriter, Write};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use steeple::infer::{split_query_form, QueryProblem};
use steeple::{display_value, Driver, EvalContext, Value};

use crate::run::{run_problem, OutputFormat, RunSettings};
use crate::{CliError, Method};

pub fn run(settings: &RunSettings) -> u8 {
    let (global, ids) = steeple::standard_global_env();
    let session = global.child();
    let mut ctx = EvalContext::new(Driver::Sample, ChaCha8Rng::seed_from_u64(settings.seed), ids);
    let mut local = settings.clone();
    local.format = OutputFormat::Summary;

    eprintln!("steeple session; :help lists directives, ctrl-d leaves");
    let stdin = io::stdin();
    let mut lines = stdin.lock().lines();
    let mut buffer = String::new();
    let mut top_index: u32 = 0;
    loop {
        eprint!("{}", if buffer.is_empty() { "steeple> " } else { "    ...> " });
        let Some(Ok(line)) = lines.next() else { break };
        if buffer.is_empty() {
            let head = line.trim();
            if head.is_empty() {
                continue;
            }
            if let Some(text) = head.strip_prefix(':') {
                if !directive(text, &mut local) {
                    break;
                }
                continue;
            }
        }
        buffer.push_str(&line);
        buffer.push('\n');
        let forms = match steeple::read_program_with(&buffer, &mut ctx.ids) {
            Ok(forms) => forms,
            Err(_) if steeple::input_is_incomplete(&buffer) => continue,
            Err(err) => {
                eprintln!("steeple: {}", err);
                buffer.clear();
                continue;
            }
        };
        buffer.clear();
        for form in forms {
            if let Some((style, parts)) = split_query_form(&form) {
                let problem = match QueryProblem::from_parts(style, parts, &mut ctx.ids) {
                    Ok(p) => p,
                    Err(err) => {
                        eprintln!("steeple: {}", err);
                        continue;
                    }
                };
                let mut out = BufWriter::new(io::stdout().lock());
                let shown = run_problem(&mut out, "repl", &problem, true, &session, &ctx.ids, &local)
                    .and_then(|()| out.flush().map_err(CliError::from));
                if let Err(err) = shown {
                    eprintln!("steeple: {}", err);
                }
                continue;
            }
            match ctx.run_form(top_index, &form, &session) {
                Ok(Value::Env(_)) => {}
                Ok(value) => println!("{}", display_value(&value)),
                Err(fault) => eprintln!("steeple: {}", fault),
            }
            top_index += 1;
        }
    }
    0
}

/// Handle a `:name [value]` line; false means the session should end.
fn directive(text: &str, local: &mut RunSettings) -> bool {
    let mut words = text.split_whitespace();
    let name = words.next().unwrap_or("help");
    let arg = words.next();
    match (name, arg) {
        ("quit", _) | ("exit", _) | ("q", _) => return false,
        ("method", Some(word)) => match word {
            "rejection" => local.method = Method::Rejection,
            "enumerate" => local.method = Method::Enumerate,
            "mh" => local.method = Method::Mh,
            other => eprintln!("unknown method '{}': expected rejection, enumerate, or mh", other),
        },
        ("samples", Some(word)) => assign(&mut local.samples, "samples", word),
        ("burn-in", Some(word)) => assign(&mut local.burn_in, "burn-in", word),
        ("lag", Some(word)) => assign(&mut local.lag, "lag", word),
        ("seed", Some(word)) => assign(&mut local.seed, "seed", word),
        ("max-attempts", Some(word)) => assign(&mut local.max_attempts, "max-attempts", word),
        ("max-choices", Some(word)) => assign(&mut local.max_choices, "max-choices", word),
        ("help", _) => help(local),
        _ => {
            eprintln!("unrecognized directive ':{}'", text);
            help(local);
        }
    }
    true
}

fn assign<T: FromStr>(slot: &mut T, name: &str, word: &str) {
    match word.parse() {
        Ok(value) => *slot = value,
        Err(_) => eprintln!("'{}' is not a valid value for :{}", word, name),
    }
}

fn help(local: &RunSettings) {
    eprintln!("directives:");
    eprintln!("  :method rejection|enumerate|mh   how queries are answered [{}]", local.method);
    eprintln!("  :samples N                       samples per query [{}]", local.samples);
    eprintln!("  :burn-in N                       chain warm-up steps [{}]", local.burn_in);
    eprintln!("  :lag N                           chain steps per sample [{}]", local.lag);
    eprintln!("  :seed N                          seed for query runs [{}]", local.seed);
    eprintln!("  :max-attempts N                  rejection budget [{}]", local.max_attempts);
    eprintln!("  :max-choices N                   enumeration depth bound [{}]", local.max_choices);
    eprintln!("  :quit                            leave the session");
}
