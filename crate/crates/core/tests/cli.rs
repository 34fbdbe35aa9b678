mod common;

use std::fs;
use std::process::{Command, Output};

use common::*;
use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_straddle-bounds"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(name: &str) -> String {
    fixture(name).to_string_lossy().into_owned()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn num(v: &Value, key: &str) -> f64 {
    v[key].as_f64().unwrap_or_else(|| panic!("{key} missing in {v}"))
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let head = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|c| c.parse().unwrap()).collect())
        .collect();
    (head, rows)
}

#[test]
fn lower_on_uniform_matches_closed_form() {
    let out = run(&["lower", &path("u11.json"), &path("u22.json")]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let exact = 1.5 - std::f64::consts::PI / (2.0 * 3f64.sqrt());
    assert!((num(&v, "primal_price") - exact).abs() < 1e-9);
    assert!((num(&v, "primal_price") - uniform_price()).abs() < 1e-9);
    assert!(num(&v, "gap").abs() < 1e-6);
    assert!((num(&v, "kappa") - 0.5).abs() < 1e-15);
    assert_eq!(v["certified"], Value::Bool(true));
}

#[test]
fn reversed_pair_is_a_validation_failure() {
    let out = run(&["check", &path("u22.json"), &path("u11.json")]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["condition"], "convex_order");
    assert_eq!(v["message"], "convex_order violated_at 0");
    assert_eq!(num(&v, "violated_at"), 0.0);
}

#[test]
fn dispersion_failure_names_the_interval() {
    // ν charges (-1, 1) beyond μ there: a point mass at 0 against a wider uniform
    let dir = tempfile::tempdir().unwrap();
    let mu = dir.path().join("mu.json");
    let nu = dir.path().join("nu.json");
    fs::write(&mu, r#"{"atoms":[{"x":-1,"w":0.5},{"x":1,"w":0.5}]}"#).unwrap();
    fs::write(&nu, r#"{"atoms":[{"x":-2,"w":0.25},{"x":0,"w":0.5},{"x":2,"w":0.25}]}"#).unwrap();
    let out = run(&["check", mu.to_str().unwrap(), nu.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["condition"], "dispersion");
    assert_eq!(v["interval"][0].as_f64(), Some(0.0));
}

#[test]
fn check_reports_the_decomposition() {
    let out = run(&["check", &path("u11.json"), &path("upper_nu.json")]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["upper_assumption"], Value::Bool(true));
    assert_eq!((num(&v, "a"), num(&v, "b"), num(&v, "kappa")), (-1.0, 1.0, 0.0));
    let out = run(&["check", &path("u11.json"), &path("u22.json")]);
    assert_eq!(json(&out)["upper_assumption"], Value::Bool(false));
}

#[test]
fn verify_certifies_the_hedge() {
    for nu in ["u22.json", "discrete_nu.json", "moduniform_nu.json"] {
        let out = run(&["verify", &path("u11.json"), &path(nu), "--grid", "500x500"]);
        assert_eq!(out.status.code(), Some(0));
        let v = json(&out);
        assert!(num(&v, "min_lagrangian") >= -1e-9, "{nu}: {v}");
        assert_eq!(v["passed"], Value::Bool(true));
    }
}

#[test]
fn output_is_deterministic() {
    let args = ["lower", &path("atoms_mu.json"), &path("atoms_nu.json")];
    assert_eq!(run(&args).stdout, run(&args).stdout);
    let args = ["sample", &path("u11.json"), &path("u22.json"), "--n", "50", "--seed", "9"];
    assert_eq!(run(&args).stdout, run(&args).stdout);
}

#[test]
fn floats_have_seventeen_significant_digits() {
    let out = run(&["oracle", &path("u11.json"), &path("u22.json"), "--n", "10"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["n"], 10);
    assert!(text.contains("\"epsilon\":0.0000000000000000e0"), "{text}");
    let value = text.split("\"value\":").nth(1).unwrap().split(',').next().unwrap();
    let mantissa = value.split('e').next().unwrap().trim_start_matches('-');
    assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
}

#[test]
fn out_flag_and_side_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let curves = dir.path().join("curves.csv");
    let sample = dir.path().join("sample.csv");
    let status = run(&[
        "lower",
        &path("u11.json"),
        &path("u22.json"),
        "--out",
        out.to_str().unwrap(),
        "--curves",
        curves.to_str().unwrap(),
        "--sample",
        "100",
        "--sample-out",
        sample.to_str().unwrap(),
        "--seed",
        "3",
    ]);
    assert_eq!(status.status.code(), Some(0));
    assert!(status.stdout.is_empty());
    let v: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!(v["primal_price"].is_f64());

    let (head, rows) = csv_rows(&fs::read_to_string(&curves).unwrap());
    assert_eq!(head, ["u", "x_u", "P", "Q", "phi", "zeta", "w"]);
    for r in &rows {
        let (p, q) = uniform_pq(r[1]);
        assert!((r[2] - p).abs() < 1e-9 && (r[3] - q).abs() < 1e-9);
        assert!((r[6] - (r[3] - r[1]) / (r[3] - r[2])).abs() < 1e-12);
    }

    let (head, rows) = csv_rows(&fs::read_to_string(&sample).unwrap());
    assert_eq!(head, ["x", "y"]);
    assert_eq!(rows.len(), 100);
    assert!(rows.iter().all(|r| (-1.0..=1.0).contains(&r[0]) && (-2.0..=2.0).contains(&r[1])));
}

#[test]
fn sample_needs_an_output_file() {
    let out = run(&["lower", &path("u11.json"), &path("u22.json"), "--sample", "10"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn curves_match_call_price_difference() {
    let out = run(&["curves", &path("u11.json"), &path("u22.json"), "--from", "-3", "--to", "3", "--points", "61"]);
    assert_eq!(out.status.code(), Some(0));
    let (head, rows) = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(head, ["x", "D", "D_left", "D_right"]);
    assert_eq!(rows.len(), 61);
    // C of U[lo, hi] at x inside is (hi - x)² / (2 (hi - lo))
    let call = |lo: f64, hi: f64, x: f64| {
        if x <= lo {
            0.5 * (lo + hi) - x
        } else if x >= hi {
            0.0
        } else {
            (hi - x).powi(2) / (2.0 * (hi - lo))
        }
    };
    for r in rows {
        let x = r[0];
        assert!((r[1] - (call(-2.0, 2.0, x) - call(-1.0, 1.0, x))).abs() < 1e-14, "x={x}");
        let h = 1e-6;
        if (x.abs() - 1.0).abs() > 1e-3 && (x.abs() - 2.0).abs() > 1e-3 {
            let fd = (call(-2.0, 2.0, x + h) - call(-1.0, 1.0, x + h) - call(-2.0, 2.0, x - h) + call(-1.0, 1.0, x - h)) / (2.0 * h);
            assert!((r[2] - fd).abs() < 1e-8 && (r[3] - fd).abs() < 1e-8, "x={x}");
        }
    }
}

#[test]
fn hedge_table_and_certificate() {
    let out = run(&["hedge", &path("u11.json"), &path("u22.json"), "--from", "-1", "--to", "1", "--points", "3"]);
    let (head, rows) = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(head, ["x", "psi", "delta"]);
    // normalised at the midpoint of [a, b]
    assert_eq!(rows[1][0], 0.0);
    assert!(rows[1][1].abs() < 1e-12 && rows[1][2].abs() < 1e-12);

    let out = run(&["hedge", &path("u11.json"), &path("u22.json"), "--lagrangian-grid", "100", "100"]);
    let v = json(&out);
    assert!(num(&v, "min_lagrangian") >= -1e-9);

    let out = run(&["hedge", &path("u11.json"), &path("u22.json"), "--points", "4", "--format", "json"]);
    let v = json(&out);
    assert_eq!(v["columns"][1], "psi");
    assert_eq!(v["rows"].as_array().unwrap().len(), 4);
}

#[test]
fn upper_and_its_validation() {
    let out = run(&["upper", &path("u11.json"), &path("upper_nu.json")]);
    let v = json(&out);
    assert!((num(&v, "price") - 2.0).abs() < 1e-8);
    assert!((num(&v, "jensen_bound") - 2.0).abs() < 1e-12);
    let out = run(&["upper", &path("u11.json"), &path("u22.json")]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["condition"], "strengthened_dispersion");
}

#[test]
fn multi_adds_steps() {
    let out = run(&["multi", &path("u11.json"), &path("u22.json"), &path("u44.json")]);
    let v = json(&out);
    let steps = v["steps"].as_array().unwrap();
    assert_eq!(steps.len(), 2);
    let sum: f64 = steps.iter().map(|s| num(s, "primal_price")).sum();
    assert_eq!(num(&v, "total"), sum);
    assert!((num(&v, "total") - 3.0 * uniform_price()).abs() < 1e-9);

    let out = run(&["multi", &path("u22.json"), &path("u11.json"), &path("u44.json")]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["step"], 1);
}

#[test]
fn report_as_csv() {
    let out = run(&["oracle", &path("u11.json"), &path("upper_nu.json"), "--n", "20", "--sense", "max", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("value,epsilon,n"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert!((row[0].parse::<f64>().unwrap() - 2.0).abs() < 2e-2);
    assert_eq!(row[2], "20");
}

#[test]
fn input_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"uniforms":[]}"#).unwrap();
    for args in [
        vec!["lower", bad.to_str().unwrap(), &path("u22.json")],
        vec!["lower", "/nonexistent.json", &path("u22.json")],
        vec!["verify", &path("u11.json"), &path("u22.json"), "--grid", "1x5"],
        vec!["lower", &path("u11.json"), &path("u22.json"), "--tol-subhedge", "0"],
        vec!["frobnicate"],
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
