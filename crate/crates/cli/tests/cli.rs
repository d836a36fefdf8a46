use std::process::{Command, Output};

use bmcurrent::evaluator::PairingResult;
use bmcurrent::linalg::ExponentMatrix;
use bmcurrent::structure::{decompose, parse_structured, CurrentTerm};
use serde_json::Value;

const FLAGSHIP: &str = r#"{"p":2,"n":3,"A":[[1,1,0],[0,1,1]]}"#;
const FLAGSHIP_FORM: &str =
    r#"{"n":3,"components":[{"I":[1,2],"a":[0,1,1],"b":[0,0,0],"profile":{"family":"bump","R":1.0}}]}"#;
const LINE_2: &str = r#"{"p":1,"n":1,"A":[[2]]}"#;
const LINE_2_FORM: &str = r#"{"n":1,"components":[{"I":[1],"a":[1],"b":[0],"profile":{"family":"bump","R":1.0}}]}"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bmcurrent")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("JSON output")
}

#[test]
fn structure_of_flagship() {
    let out = run(&["structure", "--matrix", FLAGSHIP, "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["terms"].as_array().unwrap().len(), 3);
    assert_eq!(v["skipped"].as_array().unwrap().len(), 0);
    let text = run(&["structure", "--matrix", FLAGSHIP]);
    let text = String::from_utf8(text.stdout).unwrap();
    assert!(text.contains("− ∂̄[1/ζ2^2] ∧ (1/(ζ1^1 ζ̄1)) ∧ [1/ζ3^1] · F(|ζ1|²,|ζ3|²)"));
}

#[test]
fn structure_document_round_trips() {
    let out = run(&["structure", "--matrix", FLAGSHIP, "--format", "json"]);
    let v = json(&out);
    let reparsed: Vec<CurrentTerm> =
        v["terms"].as_array().unwrap().iter().map(|t| parse_structured(&t.to_string()).unwrap()).collect();
    let a = ExponentMatrix::new(vec![vec![1, 1, 0], vec![0, 1, 1]]).unwrap();
    assert_eq!(reparsed, decompose(&a).unwrap().terms);
}

#[test]
fn analyze_reports_q_zero_with_witness() {
    let out = run(&["analyze", "--matrix", r#"{"p":2,"n":2,"A":[[1,3],[0,1]]}"#, "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let reports = json(&out)["reports"].as_array().unwrap().clone();
    assert_eq!(reports.len(), 1);
    assert_eq!(reports[0]["vanishing"], "q_zero");
    assert!(reports[0]["witness"].is_array());
}

#[test]
fn schema_errors_exit_2() {
    let neg = run(&["analyze", "--matrix", r#"{"p":2,"n":2,"A":[[1,-3],[0,1]]}"#]);
    assert_eq!(neg.status.code(), Some(2));
    let garbage = run(&["structure", "--matrix", "{not json"]);
    assert_eq!(garbage.status.code(), Some(2));
    let mismatch = run(&["eval", "--matrix", FLAGSHIP, "--testform", LINE_2_FORM]);
    assert_eq!(mismatch.status.code(), Some(2));
    let bad_tol = run(&["eval", "--matrix", LINE_2, "--testform", LINE_2_FORM, "--rel-tol", "-1"]);
    assert_eq!(bad_tol.status.code(), Some(2));
    let unknown = run(&["frobnicate"]);
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn numeric_failures_exit_3() {
    let out = run(&["verify", "--matrix", LINE_2, "--testform", LINE_2_FORM, "--taus", "0.25,0.001,0.2,0.0001,0.15"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn eval_is_deterministic_and_round_trips() {
    let args = ["eval", "--matrix", FLAGSHIP, "--testform", FLAGSHIP_FORM, "--format", "json"];
    let first = run(&args);
    let second = run(&args);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);
    let r: PairingResult = serde_json::from_slice(&first.stdout).unwrap();
    assert!((r.value.im + 1.528268588).abs() < 1e-6 && r.value.re.abs() < 1e-12);
    let again = serde_json::to_value(&r).unwrap();
    assert_eq!(again, json(&first));
}

#[test]
fn bracket_convention_scales_by_two_pi_i() {
    let out = run(&["eval", "--matrix", LINE_2, "--testform", LINE_2_FORM, "--format", "json", "--convention", "bracket"]);
    let r: PairingResult = serde_json::from_slice(&out.stdout).unwrap();
    assert!(r.value.re.abs() < 1e-12);
    assert!((r.value.im - 2.0 * std::f64::consts::PI).abs() < 1e-9);
}

#[test]
fn testform_from_file() {
    let dir = std::env::temp_dir().join(format!("bmcurrent-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("form.json");
    std::fs::write(&path, LINE_2_FORM).unwrap();
    let arg = format!("@{}", path.display());
    let out = run(&["eval", "--matrix", LINE_2, "--testform", &arg, "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    assert!((json(&out)["value"][0].as_f64().unwrap() - 1.0).abs() < 1e-12);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn verify_pass_fail_and_strict() {
    let pass = run(&["verify", "--matrix", LINE_2, "--testform", LINE_2_FORM, "--format", "json"]);
    assert_eq!(pass.status.code(), Some(0));
    let v = json(&pass);
    assert_eq!(v["pass"], true);
    assert_eq!(v["cases"][0]["pass"], true);

    let tight = ["verify", "--matrix", LINE_2, "--testform", LINE_2_FORM, "--tolerance", "1e-9"];
    let fail = run(&tight);
    assert_eq!(fail.status.code(), Some(0));
    let text = String::from_utf8(fail.stdout).unwrap();
    assert!(text.contains("FAIL") && text.contains("overall: FAIL"));

    let mut strict = tight.to_vec();
    strict.push("--strict");
    assert_eq!(run(&strict).status.code(), Some(1));
}

#[test]
fn verify_without_cases_is_vacuous() {
    let out = run(&["verify", "--matrix", LINE_2]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("vacuous") && text.contains("overall: PASS"));
}

#[test]
fn verify_random_cases_depend_only_on_seed() {
    let args = ["verify", "--matrix", LINE_2, "--random", "2", "--seed", "11", "--tau-points", "10", "--format", "json"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["cases"].as_array().unwrap().len(), 2);
}

#[test]
fn mb_reflection_value() {
    let spec = r#"{"dim":1,"gamma_rows":[["1"],["-1"]],"power_exponents":[[{"var":1,"exponent":"1"}]]}"#;
    let out = run(&["mb", "--spec", spec, "--x", "0.25", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out)["value"].as_f64().unwrap();
    assert!((v - 0.16).abs() < 1e-12);
    let bad = run(&["mb", "--spec", spec, "--x", "0.25,1"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn selfcheck_passes() {
    let out = run(&["selfcheck", "--strict", "--seed", "5", "--cases", "20", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["pass"], true);
}

#[test]
fn json_keys_are_sorted() {
    let out = run(&["eval", "--matrix", LINE_2, "--testform", LINE_2_FORM, "--format", "json"]);
    let raw = String::from_utf8(out.stdout).unwrap();
    let keys = ["\"abs_error_estimate\"", "\"convention\"", "\"quadrature_evaluations\"", "\"selection_trace\"", "\"value\""];
    let pos: Vec<usize> = keys.iter().map(|k| raw.find(k).unwrap()).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]), "{raw}");
}
