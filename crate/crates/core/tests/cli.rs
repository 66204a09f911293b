use std::ffi::OsString;
use std::process::Command;

use garling::cli::run;
use serde_json::Value;

fn call(args: &[&str]) -> (i32, String, String) {
    let argv: Vec<OsString> = std::iter::once("garling")
        .chain(args.iter().copied())
        .map(OsString::from)
        .collect();
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn json(args: &[&str]) -> Value {
    let (code, out, err) = call(args);
    assert_eq!(code, 0, "{err}");
    serde_json::from_str(&out).unwrap()
}

fn float(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

#[test]
fn norm_reports() {
    let v = json(&[
        "norm",
        "--weight",
        r#"{"family":"power","alpha":1.0}"#,
        "--p",
        "1",
        "--vec",
        "[0.5,1]",
    ]);
    assert_eq!(float(&v["result"]["value"]), 1.0);
    assert_eq!(v["result"]["witness"], serde_json::json!([2]));
    assert_eq!(v["tool"], "garling");
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["config"]["p"].as_f64(), Some(1.0));

    let v = json(&["norm", "--space", "lorentz", "--vec", "[0.5,1]"]);
    assert_eq!(float(&v["result"]["value"]), 1.25);
    let v = json(&["norm", "--vec", "[]"]);
    assert_eq!(float(&v["result"]["value"]), 0.0);
    let v = json(&[
        "norm", "--space", "mixed", "--blocks", "1,2", "--vec", "[3,1,-2]",
    ]);
    assert_eq!(float(&v["result"]["value"]), 5.0);
}

#[test]
fn numbers_carry_seventeen_digits() {
    let (_, out, _) = call(&["norm", "--space", "ellp", "--p", "2", "--vec", "[1,1]"]);
    assert!(out.contains("\"value\": 1.4142135623730951e0"), "{out}");
}

#[test]
fn exit_codes() {
    assert_eq!(call(&["norm", "--bogus"]).0, 2);
    assert_eq!(call(&["norm", "--vec", "[1,"]).0, 2);
    assert_eq!(
        call(&["norm", "--weight", r#"{"family":"nope"}"#, "--vec", "[1]"]).0,
        2
    );
    assert_eq!(call(&["frobnicate"]).0, 2);
    assert_eq!(call(&["norm", "--p", "0.5", "--vec", "[1]"]).0, 3);
    assert_eq!(call(&["kappa", "--n", "2", "--t", "0.9"]).0, 3);
    assert_eq!(
        call(&["kappa", "--n", "2", "--t", "1.1", "--k-cap", "3"]).0,
        4
    );
    assert_eq!(
        call(&["embed", "--eps", "0.21", "--n", "3", "--k-cap", "100"]).0,
        4
    );
    assert_eq!(call(&["--version"]).0, 0);
}

#[test]
fn verify_embed_round_trip_and_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.json");
    let plan = plan.to_str().unwrap();
    let (code, out, _) = call(&[
        "embed",
        "--eps",
        "0.5",
        "--n",
        "2",
        "--weight",
        r#"{"family":"power","alpha":1.0}"#,
        "--p",
        "1",
        "--out",
        plan,
    ]);
    assert_eq!((code, out.as_str()), (0, ""));
    let v = json(&[
        "verify-embed",
        "--plan",
        plan,
        "--trials",
        "100",
        "--seed",
        "7",
    ]);
    assert_eq!(v["result"]["pass"], true);
    assert_eq!(v["config"]["seed"], 7);

    let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(plan).unwrap()).unwrap();
    doc["plan"]["kappas"][1][0] = Value::from(1);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, doc.to_string()).unwrap();
    let (code, out, _) = call(&[
        "verify-embed",
        "--plan",
        bad.to_str().unwrap(),
        "--trials",
        "20",
    ]);
    assert_eq!(code, 5);
    let report: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["result"]["pass"], false);
}

#[test]
fn csv_projection() {
    let (code, out, _) = call(&[
        "cond", "--basis", "summing", "--n", "4", "--gauge", "both", "--format", "csv",
    ]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert!(lines[0].starts_with("# garling "));
    assert!(lines[0].contains("\"basis\": \"summing\""));
    assert_eq!(lines[1], "basis,m,gauge_kind,value,method,witness_json");
    assert_eq!(lines.len(), 2 + 8);
    assert!(lines[2].starts_with("summing(4),1,L,1.0000000000000000e0,exact-enumeration,"));

    let (_, out, _) = call(&["greedy", "--vec", "[2,2]", "--m", "1", "--format", "csv"]);
    assert_eq!(out.lines().nth(2), Some("1,[1]"));
    let v = json(&[
        "weight-report",
        "--weight",
        r#"{"family":"power","alpha":1.0}"#,
        "--horizon",
        "1000000",
    ]);
    assert_eq!(v["result"]["report"]["trend"], "growing");
}

#[test]
fn outputs_are_byte_reproducible() {
    let args = [
        "cond",
        "--basis",
        "besov",
        "--levels",
        "2",
        "--p",
        "2",
        "--mode",
        "probe",
        "--restarts",
        "4",
        "--sweeps",
        "10",
    ];
    assert_eq!(call(&args).1, call(&args).1);
    let args = ["kappa", "--n", "3", "--t", "1.2", "--p", "2"];
    assert_eq!(call(&args).1, call(&args).1);
}

#[test]
fn binary_exit_status_matches() {
    let bin = env!("CARGO_BIN_EXE_garling");
    let ok = Command::new(bin)
        .args(["greedy", "--vec", "[1,-4,2]", "--m", "2"])
        .output()
        .unwrap();
    assert!(ok.status.success());
    let v: Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(v["result"]["set"], serde_json::json!([2, 3]));
    let bad = Command::new(bin)
        .args(["norm", "--p", "0"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
