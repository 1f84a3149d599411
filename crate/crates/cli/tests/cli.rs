use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn corpus(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "corpus", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn iihs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iihs"))
        .args(args)
        .env_remove("IIHS_MAX_TRAJECTORIES")
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let mut all = vec!["--json"];
    all.extend_from_slice(args);
    let out = iihs(&all);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

#[test]
fn leakage_on_the_auction_matches_the_reference_table() {
    let v = json(&["leakage", "--model", &corpus("cocaine-a.iihs")]);
    let r = &v["report"];
    let close = |k: &str, want: f64| {
        let got = r[k].as_f64().unwrap();
        assert!((got - want).abs() < 5e-4, "{k}: {got} vs {want}");
    };
    close("h_a", 1.9319);
    close("i_forward", 0.1608);
    close("i_backward", 0.7408);
    let text = String::from_utf8(iihs(&["leakage", "--model", &corpus("cocaine-a.iihs")]).stdout).unwrap();
    assert!(text.contains("I(A^T->B^T)      0.1608"), "{text}");
}

#[test]
fn example_run_reports_checks_in_json() {
    let v = json(&["example", "--run", "website-a"]);
    assert_eq!(v["pass"], Value::Bool(true));
    assert!(v["checks"].as_array().unwrap().len() >= 6);
}

#[test]
fn every_bundled_example_passes_through_the_cli() {
    let list = json(&["example", "--list"]);
    let ids: Vec<&str> = list.as_array().unwrap().iter().map(|e| e["id"].as_str().unwrap()).collect();
    assert_eq!(ids.len(), 11);
    for id in ids {
        let out = iihs(&["example", "--run", id]);
        assert!(out.status.success(), "{id}: {}", String::from_utf8_lossy(&out.stdout));
    }
}

#[test]
fn exit_codes() {
    assert_eq!(iihs(&["validate", "--model", &corpus("cocaine-a.iihs"), "--normalized"]).status.code(), Some(0));
    // classical one-shot model is valid but not normalized
    assert_eq!(iihs(&["validate", "--model", &corpus("website-a.iihs")]).status.code(), Some(0));
    assert_eq!(iihs(&["validate", "--model", &corpus("website-a.iihs"), "--normalized"]).status.code(), Some(1));
    assert_eq!(iihs(&["validate", "--model", "/nonexistent.iihs"]).status.code(), Some(1));
    assert_eq!(iihs(&["leakage"]).status.code(), Some(2));
    assert_eq!(iihs(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(iihs(&["erasure", "--message", "012", "--horizon", "3"]).status.code(), Some(2));
    assert_eq!(iihs(&["erasure", "--message", "01", "--horizon", "3", "--p-ok", "1.5"]).status.code(), Some(2));
    assert_eq!(iihs(&["continuity", "--model", &corpus("cocaine-nd.iihs"), "--grid", "0.1,x"]).status.code(), Some(2));
    assert_eq!(iihs(&["--help"]).status.code(), Some(0));
}

#[test]
fn malformed_model_is_an_analysis_failure() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.iihs");
    std::fs::write(&p, "secrets: [a]\nthis is not a model\n").unwrap();
    let out = iihs(&["validate", "--model", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let args = ["--json", "capacity", "--model", &corpus("cocaine-nd.iihs"), "--seed", "3", "--restarts", "4"];
    let a = iihs(&args);
    let b = iihs(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let e = ["erasure", "--horizon", "8", "--trials", "500", "--seed", "4"];
    assert_eq!(iihs(&e).stdout, iihs(&e).stdout);
}

#[test]
fn trajectory_guard_comes_from_the_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_iihs"))
        .args(["leakage", "--model", &corpus("cocaine-a.iihs")])
        .env("IIHS_MAX_TRAJECTORIES", "3")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("size guard"));
}

#[test]
fn forced_erasure_transcript() {
    let v = json(&["erasure", "--message", "01", "--horizon", "3", "--force", "e,0,1"]);
    assert_eq!(v["decoded"], "01");
    assert_eq!(v["outputs"], "e01");
    let steps = v["steps"].as_array().unwrap();
    assert_eq!(steps.len(), 3);
    assert_eq!(steps[2]["feedback"], "e0");
    assert_eq!(steps[2]["input"], 1);
}

#[test]
fn normalize_roundtrips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("n.iihs");
    let r = iihs(&["normalize", "--model", &corpus("website-a.iihs"), "-o", out.to_str().unwrap()]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let v = iihs(&["validate", "--model", out.to_str().unwrap(), "--normalized"]);
    assert_eq!(v.status.code(), Some(0), "{}", String::from_utf8_lossy(&v.stdout));
}

#[test]
fn distance_and_consistency() {
    let v = json(&["distance", "--model-a", &corpus("noncont-s.iihs"), "--model-b", &corpus("noncont-t.iihs")]);
    assert!((v["distance"].as_f64().unwrap() - 0.1).abs() < 1e-12);
    let c = json(&["channel", "--model", &corpus("small-feedback.iihs"), "--check-consistency"]);
    assert_eq!(c["ok"], Value::Bool(true));
}
