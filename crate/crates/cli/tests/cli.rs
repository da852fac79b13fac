use std::path::Path;
use std::process::{Command, Output};

use nchull::model::CompactTupleModel;
use nchull::tol::Tolerances;

fn nchull(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nchull")).args(args).output().unwrap()
}

fn lines(path: &Path) -> Vec<serde_json::Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn built_example_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let out = nchull(&["build-example", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let summary = String::from_utf8(out.stderr).unwrap();
    assert!(summary.contains("alpha2 = -0.4330127018922193"), "{summary}");

    let model: CompactTupleModel = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert!((model.alpha()[0] + 0.625).abs() < 1e-15);
    assert!((model.alpha()[1] + 3f64.sqrt() / 4.0).abs() < 1e-15);
    let witness = model.witness().unwrap();
    assert!(witness.verify(&model, Tolerances::default().witness).unwrap() <= 1e-10);

    let report = dir.path().join("escape.jsonl");
    let out = nchull(&[
        "escape",
        "--model",
        path.to_str().unwrap(),
        "--levels",
        "3..5:2",
        "--seeds",
        "1",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let rows = lines(&report);
    assert!(rows[0].get("timestamp").is_some());
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[3]["summary"]["refuted"], 2);
}

#[test]
fn colliding_magnitudes_are_a_guard_failure() {
    let out = nchull(&["build-example", "--lambda", "1,-0.5,0.5,0.25"]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8(out.stderr).unwrap();
    assert!(msg.contains("entries 2 and 3"), "{msg}");
}

#[test]
fn usage_errors_exit_with_one() {
    for args in [
        &["escape", "--tol", "bogus=1"][..],
        &["escape", "--levels", "9..3"],
        &["escape", "--seeds", "a"],
        &["frobnicate"],
        &[],
    ] {
        assert_eq!(nchull(args).status.code(), Some(1), "{args:?}");
    }
    assert_eq!(nchull(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_or_broken_model_files_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    assert_eq!(
        nchull(&["ucp", "--model", missing.to_str().unwrap()]).status.code(),
        Some(2)
    );
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{\"kind\": \"diagonal\"").unwrap();
    assert_eq!(
        nchull(&["ucp", "--model", broken.to_str().unwrap()]).status.code(),
        Some(2)
    );
}

#[test]
fn empty_seed_list_gives_empty_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.jsonl");
    let out = nchull(&[
        "escape",
        "--seeds",
        "",
        "--no-timestamp",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let rows = lines(&report);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["summary"]["rows"], 0);
}

#[test]
fn levels_containing_n_use_the_probe_branch() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.jsonl");
    let out = nchull(&[
        "escape",
        "--n",
        "2",
        "--levels",
        "2..3",
        "--seeds",
        "1,2",
        "--no-timestamp",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let rows = lines(&report);
    let probes = rows[0]["certificate"]["reasons"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["kind"] == "equivalence_probe")
        .count();
    assert_eq!(probes, 1);
}

#[test]
fn injected_nonaffine_map_is_an_invariant_breach() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.jsonl");
    let path = report.to_str().unwrap();
    assert_eq!(
        nchull(&["affine", "--seeds", "1..5", "--out", path]).status.code(),
        Some(0)
    );
    let out = nchull(&["affine", "--seeds", "1..5", "--inject-nonaffine", "--out", path]);
    assert_eq!(out.status.code(), Some(3));
    let rows = lines(&report);
    assert_eq!(rows.last().unwrap()["summary"]["passed"], false);
}

#[test]
fn ucp_default_sweep_passes() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.jsonl");
    let out = nchull(&["ucp", "--no-timestamp", "--out", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let rows = lines(&report);
    assert_eq!(rows.len(), 101);
    assert!(rows[100]["summary"]["max_residual"].as_f64().unwrap() <= 1e-10);
}
