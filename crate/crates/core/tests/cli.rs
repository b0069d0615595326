mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gridplan::network::UpgradeCatalog;
use gridplan::operational::Snapshot;
use serde_json::Value;

fn gridplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridplan"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// `--case … --snapshots … --catalog …` for a bundled instance.
fn problem(name: &str) -> Vec<String> {
    let mut v = vec!["--case".to_string(), path(&common::data(&format!("{name}.case.json"))).to_string()];
    v.push("--snapshots".into());
    v.extend(common::snapshot_files(name).iter().map(|p| path(p).to_string()));
    v.push("--catalog".into());
    v.push(path(&common::data(&format!("{name}.catalog.json"))).to_string());
    v
}

fn with<'a>(head: &[&'a str], tail: &'a [String]) -> Vec<&'a str> {
    head.iter().copied().chain(tail.iter().map(String::as_str)).collect()
}

#[test]
fn plan_agrees_with_enumerate_on_toys() {
    for name in ["toy2", "toy3", "toy4"] {
        let args = problem(name);
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("plan.json");
        let log = dir.path().join("run.jsonl");
        let plan = gridplan(&with(&["plan", "--out", path(&out), "--log", path(&log)], &args));
        assert_eq!(code(&plan), 0, "{}", String::from_utf8_lossy(&plan.stderr));
        // The table goes to stdout when the JSON is written to a file.
        let table = String::from_utf8_lossy(&plan.stdout);
        assert!(table.contains("Cost"), "{table}");
        let result: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(result["status"], "optimal");
        let lines = std::fs::read_to_string(&log).unwrap();
        assert!(lines.lines().all(|l| serde_json::from_str::<Value>(l).is_ok()));

        let en = gridplan(&with(&["enumerate"], &args));
        assert_eq!(code(&en), 0);
        assert_eq!(json(&en)["cost"], result["cost"], "{name}");

        let relax = gridplan(&with(&["relax"], &args));
        assert_eq!(code(&relax), 0);
        let lb = json(&relax)["lower_bound"].as_f64().unwrap();
        assert!(lb <= result["cost"].as_f64().unwrap() + 1e-6, "{name}: {lb}");
    }
}

#[test]
fn plan_output_is_reproducible_with_batches() {
    let args = problem("toy4");
    let canon = |o: &Output| {
        let mut v = json(o);
        v.as_object_mut().unwrap().remove("metadata");
        v
    };
    let a = gridplan(&with(&["plan", "--batch", "2", "--no-greedy"], &args));
    let b = gridplan(&with(&["plan", "--batch", "2", "--no-greedy"], &args));
    assert_eq!(code(&a), 0);
    assert_eq!(canon(&a), canon(&b));
}

#[test]
fn missing_catalog_names_the_path() {
    let mut args = problem("toy2");
    let last = args.len() - 1;
    args[last] = "/nonexistent/catalog.json".into();
    let o = gridplan(&with(&["plan"], &args));
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/catalog.json"));
}

#[test]
fn node_budget_exit_code() {
    let args = problem("toy4");
    let o = gridplan(&with(&["plan", "--no-greedy", "--node-budget", "1"], &args));
    let c = code(&o);
    let status = json(&o)["status"].as_str().unwrap().to_string();
    let expect = match status.as_str() {
        "optimal" => 0,
        "feasible-gap" => 2,
        "budget-exhausted" => 4,
        s => panic!("unexpected status {s}"),
    };
    assert_eq!(c, expect);
}

#[test]
fn infeasible_plan_exit_code() {
    let inst = common::instance("toy2");
    let dir = tempfile::tempdir().unwrap();
    let mut snap = inst.scenarios.get(0).clone();
    snap.demand[1] *= 20.0;
    let snap_path = dir.path().join("heavy.json");
    std::fs::write(&snap_path, snap.to_json(&inst.case)).unwrap();
    let case = common::data("toy2.case.json");
    let cat = common::data("toy2.catalog.json");
    let o = gridplan(&[
        "plan", "--case", path(&case), "--snapshots", path(&snap_path), "--catalog", path(&cat),
    ]);
    assert_eq!(code(&o), 3);
    assert_eq!(json(&o)["status"], "infeasible");
}

#[test]
fn check_exit_codes() {
    let case30 = common::data("case30.case.json");
    let recorded = common::data("case30.recorded.snapshot.json");
    let o = gridplan(&["check", "--case", path(&case30), "--snapshot", path(&recorded)]);
    assert_eq!(code(&o), 5);
    let rep = json(&o);
    assert_eq!(rep["source"], "recorded");
    let violations = rep["violations"].as_array().unwrap();
    assert!(violations.iter().any(|v| v["kind"] == "voltage"), "{violations:?}");

    // Inside a wide band only the overloaded line remains.
    let o = gridplan(&["check", "--case", path(&case30), "--v-band", "0.9,1.1", "--snapshot", path(&recorded)]);
    let rep = json(&o);
    let kinds: Vec<&str> = rep["violations"].as_array().unwrap().iter().map(|v| v["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds, vec!["current"]);

    // Without recorded voltages the Newton policy supplies the point.
    let inst = common::instance("toy4");
    let dir = tempfile::tempdir().unwrap();
    let snap = Snapshot {
        v_recorded: None,
        demand: inst.scenarios.get(0).demand.iter().map(|d| d * 0.1).collect(),
        ..inst.scenarios.get(0).clone()
    };
    let p = dir.path().join("light.json");
    std::fs::write(&p, snap.to_json(&inst.case)).unwrap();
    let o = gridplan(&["check", "--case", path(&common::data("toy4.case.json")), "--snapshot", path(&p)]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["source"], "newton-pf");
}

#[test]
fn tampered_snapshot_is_rejected() {
    let text = std::fs::read_to_string(common::data("case30.recorded.snapshot.json")).unwrap();
    let mut doc: Value = serde_json::from_str(&text).unwrap();
    doc["voltages"][3]["im"] = serde_json::json!(0.3);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, doc.to_string()).unwrap();
    let o = gridplan(&["check", "--case", path(&common::data("case30.case.json")), "--snapshot", path(&p)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.json"));
}

#[test]
fn pf_without_load_is_flat() {
    let o = gridplan(&["pf", "--case", path(&common::data("toy3.case.json"))]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    let slack = 1.02;
    for bus in v["point"]["v"].as_array().unwrap() {
        assert!((bus[0].as_f64().unwrap() - slack).abs() < 1e-9, "{bus}");
        assert!(bus[1].as_f64().unwrap().abs() < 1e-9);
    }
}

#[test]
fn pf_on_matpower_case() {
    let m = common::data("case30.m");
    let o = gridplan(&["pf", "--case", path(&m), "--snapshot", path(&common::data("case30.recorded.snapshot.json"))]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(json(&o)["residual_inf"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn enumerate_refuses_large_catalogs() {
    let inst = common::instance("case30");
    let options = inst.catalog.options[..20].to_vec();
    let cat = UpgradeCatalog::new(&inst.case, options, vec![]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p: PathBuf = dir.path().join("twenty.json");
    std::fs::write(&p, cat.to_json()).unwrap();
    let o = gridplan(&[
        "enumerate",
        "--case",
        path(&common::data("case30.case.json")),
        "--snapshots",
        path(&common::data("case30.recorded.snapshot.json")),
        "--catalog",
        path(&p),
    ]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("16"));
}

#[test]
fn relax_exports_the_program() {
    let args = problem("toy3");
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("root.json");
    let o = gridplan(&with(&["relax", "--export", path(&p)], &args));
    assert_eq!(code(&o), 0);
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
    assert!(doc["n_var"].as_u64().unwrap() > 0);
    let a = json(&o)["a"].as_array().unwrap().len();
    assert_eq!(a, 3);
}

#[test]
fn unknown_policy_is_an_error() {
    let args = problem("toy2");
    let o = gridplan(&with(&["plan", "--policy", "droop"], &args));
    assert_eq!(code(&o), 1);
}
