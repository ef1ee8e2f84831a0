//! Command line runner for steeple programs: forward sampling, rejection
//! sampling, exact enumeration, and Metropolis-Hastings, with deterministic
//! seeded output. With no program it drops into a read-eval-print loop.

mod repl;
mod run;

use std::fmt;
use std::fs;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use run::{run_program, OutputFormat, RunSettings};
use steeple::infer::InferenceError;

#[derive(Parser)]
#[command(name = "steeple", version, about = "Run programs in a stochastic Scheme dialect")]
struct Args {
    /// Program file to run; omit for an interactive session.
    input: Option<String>,

    /// Program text given inline instead of a file.
    #[arg(long, conflicts_with = "input")]
    expr: Option<String>,

    /// Run one of the bundled example models.
    #[arg(long, conflicts_with_all = ["input", "expr"])]
    fixture: Option<String>,

    /// List the bundled example models and exit.
    #[arg(long)]
    list_fixtures: bool,

    /// How to answer a query (and how to sample an unconditioned program).
    #[arg(long, value_enum, default_value_t = Method::Rejection)]
    method: Method,

    /// Samples to draw (or chain samples to collect).
    #[arg(long, default_value_t = 1000)]
    samples: usize,

    /// Chain steps discarded before collecting.
    #[arg(long, default_value_t = 100)]
    burn_in: usize,

    /// Chain steps between collected samples.
    #[arg(long, default_value_t = 1)]
    lag: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Random choices after which enumeration abandons a path.
    #[arg(long, default_value_t = 64)]
    max_choices: usize,

    /// Paths no more probable than this are abandoned by enumeration.
    #[arg(long, default_value_t = 0.0)]
    min_path_prob: f64,

    /// Rejection attempts allowed per accepted sample.
    #[arg(long, default_value_t = 1_000_000)]
    max_attempts: u64,

    #[arg(long, value_enum, default_value_t = Format::Jsonl)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Rejection,
    Enumerate,
    Mh,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Rejection => "rejection",
            Method::Enumerate => "enumerate",
            Method::Mh => "mh",
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Jsonl,
    Csv,
    Summary,
}

fn main() -> ExitCode {
    let args = Args::parse();

    if args.list_fixtures {
        for name in steeple::fixture_names() {
            println!("{}", name);
        }
        return ExitCode::SUCCESS;
    }

    let outcome = load_source(&args).and_then(|found| {
        let Some((label, source)) = found else {
            return Ok(ExitCode::from(repl::run(&settings_of(&args))));
        };
        run_program(&label, &source, &settings_of(&args)).map(|()| ExitCode::SUCCESS)
    });
    outcome.unwrap_or_else(|err| {
        eprintln!("steeple: {}", err);
        ExitCode::from(err.exit_code())
    })
}

fn load_source(args: &Args) -> Result<Option<(String, String)>, CliError> {
    if let Some(name) = &args.fixture {
        let source = steeple::fixture_source(name).map_err(|e| CliError::Usage(e.to_string()))?;
        return Ok(Some((format!("fixture:{}", name), source)));
    }
    if let Some(text) = &args.expr {
        return Ok(Some(("expr".to_string(), text.clone())));
    }
    if let Some(path) = &args.input {
        let source = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("{}: {}", path, e)))?;
        return Ok(Some((path.clone(), source)));
    }
    Ok(None)
}

fn settings_of(args: &Args) -> RunSettings {
    RunSettings {
        method: args.method,
        samples: args.samples,
        burn_in: args.burn_in,
        lag: args.lag,
        seed: args.seed,
        max_choices: args.max_choices,
        min_path_prob: args.min_path_prob,
        max_attempts: args.max_attempts,
        format: match args.format {
            Format::Jsonl => OutputFormat::Jsonl,
            Format::Csv => OutputFormat::Csv,
            Format::Summary => OutputFormat::Summary,
        },
    }
}

pub(crate) enum CliError {
    Read(steeple::ReadError),
    Problem(steeple::infer::ProblemError),
    Inference(InferenceError),
    Usage(String),
    Io(std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Read(_) | CliError::Problem(_) | CliError::Usage(_) => 2,
            CliError::Inference(InferenceError::BudgetExceeded { .. }) => 3,
            CliError::Inference(_) | CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Read(e) => e.fmt(f),
            CliError::Problem(e) => e.fmt(f),
            CliError::Inference(e) => e.fmt(f),
            CliError::Usage(msg) => f.write_str(msg),
            CliError::Io(e) => e.fmt(f),
        }
    }
}

impl From<steeple::ReadError> for CliError {
    fn from(e: steeple::ReadError) -> Self {
        CliError::Read(e)
    }
}

impl From<steeple::infer::ProblemError> for CliError {
    fn from(e: steeple::infer::ProblemError) -> Self {
        CliError::Problem(e)
    }
}

impl From<InferenceError> for CliError {
    fn from(e: InferenceError) -> Self {
        CliError::Inference(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}
