use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mindiv")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

struct Fixture {
    _dir: TempDir,
    p: PathBuf,
    q: PathBuf,
    family: PathBuf,
    sample: PathBuf,
    linear: PathBuf,
}

fn fixture() -> Fixture {
    let dir = TempDir::new().unwrap();
    let p = write(dir.path(), "p.json", r#"{"alphabet": ["a","b","c"], "probs": [0.2, 0.3, 0.5]}"#);
    let q = write(dir.path(), "q.json", r#"{"alphabet": ["a","b","c"], "probs": [0.4, 0.4, 0.2]}"#);
    let family = write(
        dir.path(),
        "family.json",
        r#"{"kind": "alpha_power_law", "alpha": 2.0, "q": [0.3, 0.3, 0.4], "f": [[0.0, 0.5, 1.0]], "alphabet": ["a","b","c"]}"#,
    );
    let sample = write(dir.path(), "sample.csv", "symbol\na\nb\nb\nc\nc\nc\na\nc\n");
    let linear = write(dir.path(), "linear.json", r#"{"f": [[0.0, 1.0, 2.0]], "a": [1.2]}"#);
    Fixture { _dir: dir, p, q, family, sample, linear }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn divergence_of_equal_arguments_is_zero() {
    let fx = fixture();
    for kind in ["kl", "renyi", "dpd", "rae"] {
        let out = run(&["divergence", "--kind", kind, "--alpha", "2", "--p", s(&fx.p), "--q", s(&fx.p)]);
        assert_eq!(out.status.code(), Some(0));
        let r = report(&out);
        assert_eq!(r["status"], "ok");
        assert_eq!(r["result"]["value"].as_f64().unwrap().abs(), 0.0, "{kind}");
    }
}

#[test]
fn divergence_is_positive_for_distinct_arguments() {
    let fx = fixture();
    let out = run(&["divergence", "--kind", "kl", "--p", s(&fx.p), "--q", s(&fx.q)]);
    let value = report(&out)["result"]["value"].as_f64().unwrap();
    let direct: f64 = [(0.2f64, 0.4f64), (0.3, 0.4), (0.5, 0.2)].iter().map(|(a, b)| a * (a / b).ln()).sum();
    assert!((value - direct).abs() <= 1e-11);
}

#[test]
fn both_routes_report_their_gap() {
    let fx = fixture();
    let out =
        run(&["estimate", "--kind", "jones", "--family", s(&fx.family), "--sample", s(&fx.sample), "--route", "both"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert!(r["result"]["route_gap"].as_f64().unwrap() <= 1e-6);
    assert_eq!(r["result"]["routes_agree"], true);
    assert_eq!(r["result"]["matched"], true);
}

#[test]
fn unmatched_pair_is_flagged() {
    let fx = fixture();
    let out = run(&["estimate", "--kind", "basu", "--family", s(&fx.family), "--sample", s(&fx.sample)]);
    let r = report(&out);
    assert_eq!(r["result"]["matched"], false);
    assert!(r["result"]["note"].is_string());
}

#[test]
fn forward_projection_meets_the_constraint() {
    let fx = fixture();
    let out = run(&["project", "forward", "--alpha", "2", "--q", s(&fx.q), "--linear", s(&fx.linear)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    let p: Vec<f64> = r["result"]["p_star"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!((p[1] + 2.0 * p[2] - 1.2).abs() <= 1e-10);
    assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let fx = fixture();
    let args = [
        "sample",
        "--family",
        s(&fx.family),
        "--theta",
        "0.1",
        "--n",
        "25",
        "--contamination-rate",
        "0.2",
        "--outlier",
        "c",
        "--seed",
        "7",
    ];
    let (a, b) = (run(&args), run(&args));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn text_format_prints_key_value_lines() {
    let fx = fixture();
    let out = run(&["divergence", "--kind", "kl", "--p", s(&fx.p), "--q", s(&fx.q), "--format", "text"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("result.value: ")));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_sample_request_is_an_input_error() {
    let fx = fixture();
    let out = run(&["sample", "--family", s(&fx.family), "--theta", "0", "--n", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn missing_file_is_an_input_error() {
    let out = run(&["divergence", "--kind", "kl", "--p", "/nonexistent/p.json", "--q", "/nonexistent/q.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_config_key_is_rejected() {
    let fx = fixture();
    let dir = TempDir::new().unwrap();
    let config = write(dir.path(), "run.conf", "# run settings\nresidual_tol = 1e-9\nspeed = fast\n");
    let out = run(&["divergence", "--kind", "kl", "--p", s(&fx.p), "--q", s(&fx.q), "--config", s(&config)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_values_are_recorded() {
    let fx = fixture();
    let dir = TempDir::new().unwrap();
    let config = write(dir.path(), "run.conf", "residual_tol = 1e-9\nseed = 3\n");
    let out = run(&["divergence", "--kind", "kl", "--p", s(&fx.p), "--q", s(&fx.q), "--config", s(&config)]);
    let r = report(&out);
    assert_eq!(r["config"]["residual_tol"].as_f64(), Some(1e-9));
    assert_eq!(r["seed"], 3);
}
