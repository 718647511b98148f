use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curvhom")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

fn status_of(report: &Value, property: &str) -> String {
    report["verdicts"]
        .as_array()
        .unwrap()
        .iter()
        .find(|v| v["property"] == property)
        .unwrap_or_else(|| panic!("no verdict {property}"))["status"]
        .as_str()
        .unwrap()
        .to_string()
}

#[test]
fn verify_families_exit_zero() {
    let o = run(&["verify", "--family", "f", "--function", "exp(x)", "--order", "4", "--grid", "x=0:1:9"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&o);
    for key in ["config", "verdicts", "invariants", "exclusions", "tool_version"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
    let o = run(&["verify", "--family", "h", "--function", "t^3", "--order", "2", "--grid", "t=1:2:9"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn parse_error_exits_two_with_position() {
    let o = run(&["verify", "--family", "f", "--function", "x + * 2", "--grid", "x=0:1:3"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("parse error at 4"));
}

#[test]
fn config_errors_exit_two() {
    for args in [
        vec!["classify", "--family", "f", "--function", "exp(t)", "--grid", "x=0:1:3"],
        vec!["classify", "--family", "f", "--function", "exp(x)"],
        vec!["classify", "--family", "f", "--function", "exp(x)", "--grid", "x=0:1"],
        vec!["classify", "--family", "f", "--function", "exp(x)", "--grid", "x=0:1:3", "--tol", "-1"],
        vec!["classify", "--family", "f", "--function", "exp(x)", "--grid", "x=0:1:3", "--format", "csv"],
        vec!["classify", "--family", "q", "--function", "exp(x)", "--grid", "x=0:1:3"],
        vec!["invariants", "--family", "h", "--function", "t^3", "--grid", "t=1:2:0"],
        vec!["verify", "--family", "custom", "--grid", "t=1:2:3"],
    ] {
        let o = run(&args);
        assert_eq!(code(&o), 2, "{args:?}");
    }
}

#[test]
fn classify_gf_exponential() {
    let o = run(&["classify", "--family", "f", "--function", "exp(x)", "--order", "3", "--grid", "x=0:1:11"]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    assert_eq!(status_of(&r, "CH_0"), "pass");
    for k in 1..=3 {
        assert_eq!(status_of(&r, &format!("CH_{k}(1,3)")), "pass");
    }
    assert_eq!(status_of(&r, "SCH_1(1,3)"), "fail");
    assert_eq!(status_of(&r, "locally_homogeneous"), "fail");
}

#[test]
fn classify_gh_cubic_and_exponential() {
    let o = run(&["classify", "--family", "h", "--function", "t^3", "--order", "2", "--grid", "t=1:2:9"]);
    let r = json(&o);
    assert_eq!(status_of(&r, "CH_0"), "pass");
    assert_eq!(status_of(&r, "SCH_1(1,3)"), "pass");
    assert_eq!(status_of(&r, "CH_1"), "fail");

    let o = run(&["classify", "--family", "h", "--function", "exp(t)", "--order", "2", "--grid", "t=0:1:5"]);
    let r = json(&o);
    for inv in r["invariants"].as_array().unwrap() {
        assert!(inv["summary"]["spread"].as_f64().unwrap() < 1e-9, "{}", inv["name"]);
    }
}

#[test]
fn flat_metric_is_degenerate_and_ok() {
    let o = run(&["classify", "--family", "h", "--function", "0", "--grid", "t=0:1:3"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["degenerate"], "degenerate: zero curvature");
}

#[test]
fn hypothesis_violated_everywhere_exits_three() {
    let o = run(&["invariants", "--family", "h", "--function", "t^2", "--grid", "t=1:2:3"]);
    assert_eq!(code(&o), 3);
    let o = run(&["verify", "--family", "f", "--function", "ln(x)", "--grid", "x=-2:-1:3"]);
    assert_eq!(code(&o), 3);
    let o = run(&["classify", "--family", "custom", "--metric", "tt=1; xx=sin(t)^2; yy=-1", "--grid", "t=0.5:1:3"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn output_is_deterministic() {
    let args = ["classify", "--family", "f", "--function", "x^3 - x", "--order", "2", "--grid", "x=0.1:1:7", "--grid", "t=0:1:2"];
    let a = run(&args);
    let b = run(&args);
    let mut seq = args.to_vec();
    seq.push("--sequential");
    let c = run(&seq);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn invariants_csv_and_json() {
    let o = run(&["invariants", "--family", "f", "--function", "exp(x)", "--grid", "x=0:0:1", "--format", "csv"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let xi = header.iter().position(|h| *h == "Xi_f").unwrap();
    assert!((row[xi].parse::<f64>().unwrap() - 9.0).abs() < 1e-8);

    let o = run(&["invariants", "--family", "h", "--function", "t^3", "--grid", "t=2:2:1"]);
    let r = json(&o);
    let row = &r["invariants"][0];
    assert!((row["Xi_h"].as_f64().unwrap() - 0.25).abs() < 1e-8);
    assert!((row["xi_X"].as_f64().unwrap() + 0.5).abs() < 1e-8);
}

#[test]
fn config_file_and_output_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    let out = dir.path().join("report.json");
    fs::write(&cfg, "# h-family run\nfamily = h\nfunction = t^3\norder = 1\ngrid = t=1:2:5\n").unwrap();
    let o = run(&["classify", "--config", cfg.to_str().unwrap(), "--output", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let r: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r["config"]["order"], 1);
    assert_eq!(r["config"]["samples"].as_array().unwrap().len(), 5);

    // Flags override the file.
    let o = run(&["classify", "--config", cfg.to_str().unwrap(), "--order", "2"]);
    assert_eq!(json(&o)["config"]["order"], 2);

    fs::write(&cfg, "family = h\nshade = blue\n").unwrap();
    assert_eq!(code(&run(&["classify", "--config", cfg.to_str().unwrap()])), 2);
    assert_eq!(code(&run(&["classify", "--config", dir.path().join("missing").to_str().unwrap()])), 2);
}

#[test]
fn custom_metric_verify_checks_identities() {
    let o = run(&["verify", "--family", "custom", "--metric", "tt=1; xy=1; xx=-2*t^3", "--order", "2", "--grid", "t=1:2:3"]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    let statuses: Vec<&str> = r["verdicts"].as_array().unwrap().iter().map(|v| v["status"].as_str().unwrap()).collect();
    assert_eq!(statuses, vec!["skipped", "skipped", "skipped", "pass"]);
}
