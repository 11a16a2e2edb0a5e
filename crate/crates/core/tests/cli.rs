//! The `mpec-cq` binary end to end: exit codes, file formats, environment
//! overrides and output determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mpec_cq::fixtures::e2;
use mpec_cq::report::EvaluationRecord;
use serde_json::Value;

const DATA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/toy.csv");

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mpec-cq"));
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("MPECCQ_")) {
        c.env_remove(k);
    }
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn e2_record(dir: &Path) -> PathBuf {
    let f = e2();
    let rec = EvaluationRecord { eval: f.eval, grad_f: Some(f.grad_f) };
    write(dir, "e2.json", &serde_json::to_string(&rec).unwrap())
}

#[test]
fn fixtures_pass() {
    let out = run(&["fixtures"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(json(&out)["results"].as_array().is_some_and(|r| r.len() == 3));
}

#[test]
fn malformed_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", "{\"n\": 2, \"m\":");
    assert_eq!(run(&["check", "--input", bad.to_str().unwrap()]).status.code(), Some(2));
    let short = write(
        dir.path(),
        "short.json",
        r#"{"n":2,"m":0,"p":0,"l":1,"point":[0],"g_vals":[],"h_vals":[],"G_vals":[0],"H_vals":[0],"g_grads":[],"h_grads":[],"G_grads":[[1,0]],"H_grads":[[0,1]]}"#,
    );
    assert_eq!(run(&["check", "--input", short.to_str().unwrap()]).status.code(), Some(2));
    let missing = dir.path().join("nope.json");
    assert_eq!(run(&["check", "--input", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn e2_record_check() {
    let dir = tempfile::tempdir().unwrap();
    let rec = e2_record(dir.path());
    let out = run(&["check", "--input", rec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let verdict = |name: &str| {
        v["cq"]["verdicts"].as_array().unwrap().iter().find(|x| x["cq"] == name).map(|x| x["verdict"].clone())
    };
    assert_eq!(verdict("MPEC_MFCQ_T"), Some(Value::from("fails")));
    assert_eq!(verdict("NNAMCQ"), Some(Value::from("holds")));
    assert_eq!(v["stationarity"]["strongest_class"], "strong");
}

#[test]
fn stationarity_with_inline_gradient() {
    let dir = tempfile::tempdir().unwrap();
    let rec = e2_record(dir.path());
    let out = run(&["stationarity", "--input", rec.to_str().unwrap(), "--gradf", "[-1, -1]"]);
    assert_eq!(out.status.code(), Some(0));
    assert_ne!(json(&out)["stationarity"]["strongest_class"], "strong");
    let out = run(&["stationarity", "--input", rec.to_str().unwrap(), "--gradf", "[1]"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fuzz_with_zero_iterations_succeeds() {
    let out = run(&["fuzz", "--n", "0", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(json(&out)["violations"].as_array().unwrap().is_empty());
}

#[test]
fn build_point_check_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    let pt = dir.path().join("point.json");
    let build = run(&[
        "bho",
        "build",
        "--data",
        DATA,
        "--folds",
        "2",
        "--m1",
        "4",
        "--m2",
        "8",
        "--out",
        inst.to_str().unwrap(),
    ]);
    assert_eq!(build.status.code(), Some(0), "{}", String::from_utf8_lossy(&build.stderr));
    let exported: Value = serde_json::from_str(&std::fs::read_to_string(&inst).unwrap()).unwrap();
    assert_eq!(exported["n"], 2 * 2 * (4 + 8) + 1);

    let point = run(&["bho", "point", "--instance", inst.to_str().unwrap(), "--C", "1", "--out", pt.to_str().unwrap()]);
    assert_eq!(point.status.code(), Some(0));
    let p: Value = serde_json::from_str(&std::fs::read_to_string(&pt).unwrap()).unwrap();
    for key in ["C", "zeta", "z", "alpha", "xi"] {
        assert!(p.get(key).is_some(), "{key}");
    }

    let check = run(&["check", "--input", inst.to_str().unwrap(), "--point", pt.to_str().unwrap()]);
    assert_eq!(check.status.code(), Some(0), "{}", String::from_utf8_lossy(&check.stdout));
    let v = json(&check);
    assert_eq!(v["instance_digest"], exported["digest"]);
    assert!(v["agreement"].as_array().unwrap().iter().all(|a| a["agrees"] == true));
}

#[test]
fn sweep_is_byte_identical_across_runs() {
    let args = [
        "bho",
        "sweep",
        "--data",
        DATA,
        "--folds",
        "1",
        "--m1",
        "6",
        "--m2",
        "10",
        "--c-min",
        "0.01",
        "--c-max",
        "100",
        "--c-count",
        "5",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["entries"].as_array().unwrap().len(), 5);
}

#[test]
fn environment_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let rec = e2_record(dir.path());
    let out =
        bin().args(["check", "--input", rec.to_str().unwrap()]).env("MPECCQ_TOL_ACTIVITY", "-1").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["fuzz"]).env("MPECCQ_N", "0").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["affine_points"], 0);
}

#[test]
fn infeasible_point_exits_one_without_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let f = e2();
    let mut rec = EvaluationRecord { eval: f.eval, grad_f: None };
    rec.eval.comp_g_vals[0] = -1.0;
    let p = write(dir.path(), "bad.json", &serde_json::to_string(&rec).unwrap());
    let out = run(&["check", "--input", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["feasibility"]["feasible"], false);
    assert!(v["cq"].is_null());
}

#[test]
fn insufficient_data_exits_two() {
    let out = run(&[
        "bho",
        "sweep",
        "--data",
        DATA,
        "--folds",
        "1",
        "--m1",
        "40",
        "--m2",
        "40",
        "--c-min",
        "1",
        "--c-max",
        "1",
        "--c-count",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
}
