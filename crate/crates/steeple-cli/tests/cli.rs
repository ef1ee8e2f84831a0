use std::io::Write;
use std::process::{Command, Output, Stdio};

fn steeple(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_steeple"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is utf-8")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr is utf-8")
}

#[test]
fn lists_every_bundled_fixture() {
    let out = steeple(&["--list-fixtures"]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    let listed: Vec<&str> = text.lines().map(str::trim).collect();
    assert_eq!(listed, steeple::fixture_names());
}

#[test]
fn enumerates_the_two_flip_model_exactly() {
    let out = steeple(&["--fixture", "two-flip", "--method", "enumerate", "--format", "csv"]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("value,probability"));
    let rows: Vec<(&str, f64)> = lines
        .map(|l| {
            let (v, p) = l.rsplit_once(',').expect("two columns");
            (v, p.parse().expect("a probability"))
        })
        .collect();
    let values: Vec<&str> = rows.iter().map(|r| r.0).collect();
    assert_eq!(values, ["(false true)", "(true false)", "(true true)"]);
    for (_, p) in rows {
        assert!((p - 1.0 / 3.0).abs() < 1e-12);
    }
}

#[test]
fn jsonl_output_is_structured_and_self_describing() {
    let out = steeple(&[
        "--fixture",
        "two-flip",
        "--samples",
        "20",
        "--seed",
        "4",
        "--format",
        "jsonl",
    ]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    let rows: Vec<serde_json::Value> =
        text.lines().map(|l| serde_json::from_str(l).expect("valid json")).collect();
    assert_eq!(rows.len(), 22, "header, 20 samples, summary");

    assert_eq!(rows[0]["type"], "run");
    assert_eq!(rows[0]["method"], "rejection");
    assert_eq!(rows[0]["conditioned"], true);
    assert_eq!(rows[0]["samples"], 20);
    assert_eq!(rows[0]["seed"], 4);

    for row in &rows[1..21] {
        assert_eq!(row["type"], "sample");
        let value = row["value"].as_str().expect("printed value");
        assert!(["(true true)", "(true false)", "(false true)"].contains(&value));
        assert!(row["attempts"].as_u64().expect("attempt count") >= 1);
    }

    assert_eq!(rows[21]["type"], "summary");
    assert_eq!(rows[21]["samples"], 20);
    let total = rows[21]["total_attempts"].as_u64().unwrap();
    assert!(total >= 20);
}

#[test]
fn every_method_repeats_byte_for_byte_under_a_fixed_seed() {
    for method in ["rejection", "mh", "enumerate"] {
        let args = [
            "--fixture",
            "geometric",
            "--method",
            method,
            "--samples",
            "50",
            "--burn-in",
            "20",
            "--seed",
            "11",
        ];
        let first = steeple(&args);
        assert!(first.status.success(), "{} run failed: {}", method, stderr_of(&first));
        for _ in 0..2 {
            let again = steeple(&args);
            assert_eq!(first.stdout, again.stdout, "{} output drifted", method);
        }
    }
}

#[test]
fn read_errors_carry_a_position_and_exit_code_two() {
    let out = steeple(&["--expr", "(flip 0.5"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_of(&out);
    assert!(err.contains("1:1"), "no position in: {}", err);

    let dir = std::env::temp_dir().join(format!("steeple-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("broken.church");
    std::fs::write(&path, "(define x\n  (flip 0.5)\n").unwrap();
    let out = steeple(&[path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("1:1"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn shape_violations_exit_with_code_two() {
    let out = steeple(&["--expr", "(flip) (flip)"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("only definitions may precede"));

    let out = steeple(&["--expr", "(define x 1)"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("final form"));

    let out = steeple(&["--expr", ""]);
    assert_eq!(out.status.code(), Some(2));

    let out = steeple(&["--fixture", "no-such-model"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("known fixtures"));
}

#[test]
fn a_hopeless_condition_exhausts_the_budget_and_exits_three() {
    let out = steeple(&[
        "--expr",
        "(query (define x (flip)) x false)",
        "--samples",
        "1",
        "--max-attempts",
        "500",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr_of(&out).contains("500"));
}

#[test]
fn an_impossible_condition_fails_enumeration_cleanly() {
    let out = steeple(&[
        "--expr",
        "(query (define x (flip)) x false)",
        "--method",
        "enumerate",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("no probability mass"));
}

#[test]
fn an_unconditioned_expression_runs_as_forward_sampling() {
    let out = steeple(&[
        "--expr",
        "(define p 0.25) (flip p)",
        "--samples",
        "400",
        "--seed",
        "2",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    let mut trues = 0;
    let mut rows = 0;
    for line in text.lines().skip(1) {
        assert!(line == "true,1" || line == "false,1", "unexpected row {}", line);
        rows += 1;
        if line.starts_with("true") {
            trues += 1;
        }
    }
    assert_eq!(rows, 400);
    let freq = trues as f64 / 400.0;
    assert!((freq - 0.25).abs() < 0.07, "flip 0.25 frequency came out {}", freq);
}

#[test]
fn the_interactive_session_keeps_definitions_and_answers_queries() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_steeple"))
        .args(["--samples", "200", "--seed", "1"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary starts");
    child
        .stdin
        .take()
        .expect("stdin piped")
        .write_all(
            b"(define (bump n) (+ n 1))\n\
              (bump 41)\n\
              (define coins\n  (repeat 2 (lambda () (flip 0.5))))\n\
              (length coins)\n\
              :method enumerate\n\
              (query (define a (flip 0.5)) a (if a true (flip 0.5)))\n\
              :quit\n",
        )
        .expect("write program");
    let out = child.wait_with_output().expect("session ends");
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "42");
    assert_eq!(lines[1], "2");
    let true_row = lines.iter().find(|l| l.contains("true")).expect("query table");
    assert!(true_row.trim_start().starts_with("0.666667"), "bad posterior row: {}", true_row);
}
