//! End-to-end tests of the `setcover` binary.

use std::path::Path;
use std::process::{Command, Output};

const E1: &str = "dsc 1\nuniverse 4\nsets 4\nset 0: 0 1\nset 1: 1 2\nset 2: 2 3\nset 3: 0 3\nstream\n+ 0\n+ 1\n+ 2\n+ 3\n";

fn setcover(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_setcover")).args(args).output().expect("binary runs")
}

fn path_str(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

fn summary_field(stdout: &[u8], field: &str) -> serde_like::Value {
    serde_like::find(std::str::from_utf8(stdout).unwrap(), field)
}

/// Minimal field lookup in the pretty-printed summary (keeps the test free of
/// a JSON dependency).
mod serde_like {
    #[derive(Debug, PartialEq)]
    pub enum Value {
        Number(f64),
        Null,
        Missing,
    }

    pub fn find(text: &str, field: &str) -> Value {
        let key = format!("\"{field}\": ");
        let Some(start) = text.find(&key) else { return Value::Missing };
        let rest = &text[start + key.len()..];
        let token: String = rest.chars().take_while(|c| !matches!(c, ',' | '\n' | '}')).collect();
        match token.trim() {
            "null" => Value::Null,
            number => Value::Number(number.parse().expect("numeric field")),
        }
    }
}

#[test]
fn logn_on_e1_with_exact_oracle_stays_within_envelope() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("e1.dsc");
    let metrics = dir.path().join("e1.csv");
    std::fs::write(&input, E1).unwrap();
    let output = setcover(&["run", "--algo", "logn", "--input", path_str(&input), "--metrics", path_str(&metrics), "--oracle", "exact"]);
    assert_eq!(output.status.code(), Some(0), "{}", String::from_utf8_lossy(&output.stderr));
    let serde_like::Value::Number(ratio) = summary_field(&output.stdout, "max_ratio") else {
        panic!("max_ratio missing: {}", String::from_utf8_lossy(&output.stdout));
    };
    assert!(ratio <= 8.0 * 4f64.ln(), "ratio {ratio}");
    let csv = std::fs::read_to_string(&metrics).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,op,e,ins_rec,del_rec,out_size,ds_ops_total,opt,ratio"));
    assert_eq!(lines.count(), 4);
}

#[test]
fn check_rejects_double_insert() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.dsc");
    std::fs::write(&input, "dsc 1\nuniverse 2\nsets 1\nset 0: 0 1\nstream\n+ 0\n+ 0\n").unwrap();
    let output = setcover(&["check", "--input", path_str(&input)]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("step 2"));
}

#[test]
fn check_accepts_e1() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("e1.dsc");
    std::fs::write(&input, E1).unwrap();
    let output = setcover(&["check", "--input", path_str(&input)]);
    assert_eq!(output.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&output.stdout).contains("4 updates"));
}

#[test]
fn f_engine_full_audit_on_churn_workload() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("churn.dsc");
    let metrics = dir.path().join("churn.csv");
    let gen = setcover(&[
        "gen", "--universe", "120", "--sets", "40", "--freq", "4", "--steps", "600", "--pattern", "random-churn",
        "--seed", "11", "--output", path_str(&input),
    ]);
    assert_eq!(gen.status.code(), Some(0));
    let output = setcover(&[
        "run", "--algo", "f", "--input", path_str(&input), "--metrics", path_str(&metrics), "--audit-every", "1",
        "--c-spd", "8", "--verify-recourse",
    ]);
    assert_eq!(output.status.code(), Some(0), "{}", String::from_utf8_lossy(&output.stderr));
    assert_eq!(summary_field(&output.stdout, "audited_steps"), serde_like::Value::Number(600.0));
}

#[test]
fn repeated_runs_write_identical_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("w.dsc");
    std::fs::write(
        &input,
        setcover(&["gen", "--universe", "200", "--sets", "50", "--steps", "500", "--pattern", "sliding-window", "--seed", "5"]).stdout,
    )
    .unwrap();
    for algo in ["logn", "f"] {
        let runs: Vec<Vec<u8>> = (0..2)
            .map(|i| {
                let metrics = dir.path().join(format!("{algo}-{i}.csv"));
                let output = setcover(&["run", "--algo", algo, "--input", path_str(&input), "--metrics", path_str(&metrics), "--audit-every", "0"]);
                assert_eq!(output.status.code(), Some(0));
                std::fs::read(&metrics).unwrap()
            })
            .collect();
        assert_eq!(runs[0], runs[1], "{algo} metrics differ between runs");
    }
}

#[test]
fn malformed_input_and_bad_flags_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("junk.dsc");
    std::fs::write(&input, "not an instance\n").unwrap();
    let metrics = dir.path().join("m.csv");
    assert_eq!(setcover(&["run", "--algo", "f", "--input", path_str(&input), "--metrics", path_str(&metrics)]).status.code(), Some(2));
    assert_eq!(setcover(&["run", "--algo", "nope", "--input", "x", "--metrics", "y"]).status.code(), Some(2));
    assert_eq!(setcover(&["gen", "--universe", "5", "--sets", "2", "--steps", "3", "--freq", "0"]).status.code(), Some(2));
}
