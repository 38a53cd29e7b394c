use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

fn qwk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qwk")).args(args).current_dir(root()).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Runs with `--out` into a temp dir and returns the parsed document.
fn doc(args: &[&str]) -> Value {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.json");
    let mut full: Vec<&str> = args.to_vec();
    let out_s = out.to_str().unwrap().to_string();
    full.extend(["--out", &out_s]);
    let o = qwk(&full);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap()
}

#[test]
fn capacity_bsc_pair() {
    let d = doc(&["capacity", "--formula", "b1", "--spec", "specs/bsc_pair.json", "--grid", "64", "--refine", "50"]);
    let v = d["report"]["value"].as_f64().unwrap();
    assert!((v - 0.412295).abs() < 1e-3, "{v}");
    assert_eq!(d["manifest"]["command"], "capacity");
    assert_eq!(d["manifest"]["overrides"]["formula"], "classical_csi");
    assert_eq!(d["manifest"]["spec"], "specs/bsc_pair.json");
}

#[test]
fn capacity_singleton_identity_is_one() {
    let d = doc(&["capacity", "--formula", "e1q", "--spec", "specs/singleton_identity.json"]);
    assert!((d["report"]["value"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn capacity_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"theta\": [").unwrap();
    let o = qwk(&["capacity", "--formula", "b1", "--spec", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);

    std::fs::write(&bad, r#"{"theta": [{"t": "a", "W": {"kind": "stochastic", "matrix": [[1.0]]}}]}"#).unwrap();
    let o = qwk(&["capacity", "--formula", "b1", "--spec", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("`V`"), "{}", stderr(&o));

    let o = qwk(&["capacity", "--formula", "b1", "--spec", "specs/qubit_wiretap.json"]);
    assert_eq!(code(&o), 3);
    let o = qwk(&["capacity", "--formula", "b7", "--spec", "specs/bsc_pair.json"]);
    assert_eq!(code(&o), 4);
    let o = qwk(&["capacity", "--formula", "b1", "--spec", "specs/bsc_pair.json", "--n", "0"]);
    assert_eq!(code(&o), 4);
}

#[test]
fn capacity_csv_has_one_row_per_state() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    let o = qwk(&["capacity", "--formula", "b1p", "--spec", "specs/bsc_swapped.json", "--csv", csv.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,legit,wiretap,value");
    assert_eq!(lines.len(), 3);
    // stdout carries the document when --out is absent
    let d: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(d["report"]["value"].as_f64().unwrap(), 0.0);
}

#[test]
fn simulate_flags() {
    let o = qwk(&["simulate", "--spec", "specs/bsc_pair.json", "--trials", "0", "--seed", "1"]);
    assert_eq!(code(&o), 4);
    let o = qwk(&["simulate", "--spec", "specs/bsc_pair.json"]);
    assert_eq!(code(&o), 4, "seed is mandatory");
    let o = qwk(&["simulate", "--spec", "specs/bsc_pair.json", "--seed", "1", "--L", "two"]);
    assert_eq!(code(&o), 4);
    let o = qwk(&["simulate", "--spec", "specs/bsc_pair.json", "--seed", "1", "--n", "30", "--J", "2", "--L", "1"]);
    assert_eq!(code(&o), 5);
    let o = qwk(&["simulate", "--spec", "specs/quantum_pair.json", "--seed", "1"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn simulate_auto_sizes() {
    let d = doc(&["simulate", "--spec", "specs/bsc_compound.json", "--n", "8", "--L", "auto", "--seed", "2", "--trials", "50"]);
    let r = &d["report"];
    assert!(r["sizes"].is_object());
    assert_eq!(r["depth"], r["sizes"]["depth"]);
    assert_eq!(r["per_t"].as_array().unwrap().len(), 2);
}

#[test]
fn simulate_singleton_protocol_skips_index_block() {
    let d = doc(&[
        "simulate", "--spec", "specs/bsc_pair.json", "--protocol", "--t-true", "degraded", "--J", "2", "--L", "2",
        "--n2", "10", "--trials", "300", "--seed", "4",
    ]);
    let r = &d["report"];
    assert_eq!(r["skipped_block1"], true);
    assert_eq!(r["monte_carlo"]["block1_error"].as_f64().unwrap(), 0.0);
}

#[test]
fn cap_override_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_qwk"))
        .args(["simulate", "--spec", "specs/qubit_wiretap.json", "--n", "6", "--J", "2", "--L", "2", "--seed", "1"])
        .env("QWK_CAP_DIM", "8")
        .current_dir(root())
        .output()
        .unwrap();
    assert_eq!(code(&o), 5, "{}", stderr(&o));
}

#[test]
fn golden_simulations_rerun_identically() {
    let golden = root().join("crates/cli/tests/golden");
    let mut names: Vec<PathBuf> = std::fs::read_dir(&golden).unwrap().map(|e| e.unwrap().path()).collect();
    names.sort();
    assert_eq!(names.len(), 3);
    let dir = tempfile::tempdir().unwrap();
    for g in names {
        let out = dir.path().join("again.json");
        let o = qwk(&["rerun", "--manifest", g.to_str().unwrap(), "--check", "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}: {}", g.display(), stderr(&o));
        let old: Value = serde_json::from_str(&std::fs::read_to_string(&g).unwrap()).unwrap();
        let new: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        let (a, b) = (serde_json::to_string_pretty(&old["report"]).unwrap(), serde_json::to_string_pretty(&new["report"]).unwrap());
        assert_eq!(a, b, "{}", g.display());
    }
}

#[test]
fn rerun_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.json");
    let o = qwk(&["net", "--tau", "1.5", "--budget", "4", "--out", first.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let mut d: Value = serde_json::from_str(&std::fs::read_to_string(&first).unwrap()).unwrap();
    d["report"]["elements"] = Value::from(5);
    std::fs::write(&first, serde_json::to_string(&d).unwrap()).unwrap();
    let o = qwk(&["rerun", "--manifest", first.to_str().unwrap(), "--check"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("report.elements"));
}

#[test]
fn net_bound_and_budget() {
    let o = qwk(&["net", "--tau", "1", "--d-in", "2", "--d-out", "2", "--budget", "8"]);
    assert_eq!(code(&o), 0);
    let d: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(d["report"]["bound_expr"], "3^32");
    assert_eq!(d["report"]["bound_exponent"], 32);
    assert_eq!(d["report"]["elements"], 8);

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("n.json");
    let o = qwk(&["net", "--tau", "1", "--budget", "2", "--out", out.to_str().unwrap()]);
    assert!(stdout(&o).contains("3^32"), "{}", stdout(&o));

    assert_eq!(code(&qwk(&["net", "--tau", "1", "--budget", "0"])), 4);
    assert_eq!(code(&qwk(&["net", "--tau", "-1"])), 4);

    let single: Value = serde_json::from_str(&stdout(&qwk(&["net", "--tau", "2"]))).unwrap();
    assert_eq!(single["report"]["elements"], 1);
    assert_eq!(single["report"]["truncated"], false);
}

#[test]
fn entangle_identity_and_perturbed_pair() {
    let d = doc(&["entangle", "--family", "specs/identity_family.json", "--J", "4", "--seed", "0"]);
    assert!(d["report"]["min_fidelity"].as_f64().unwrap() >= 1.0 - 1e-9);

    let d = doc(&["entangle", "--family", "specs/perturbed_pair.json", "--n", "2", "--J", "2", "--L", "1", "--seed", "1"]);
    let r = &d["report"];
    assert_eq!(r["bound_holds"], true);
    assert!(r["bound"].as_f64().unwrap() > 0.5);
    assert_eq!(r["per_t"][1]["t"], "rotated_flipped");
    for key in ["eqx1", "partner_overlap", "wir", "fid1", "wir2", "purification", "checks"] {
        assert!(r.get(key).is_some(), "{key}");
    }
}

#[test]
fn entangle_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("f.json");
    std::fs::write(&bad, r#"{"family": [{"t": "x", "channel": {"kind": "kraus", "ops": [[[2, 0], [0, 1]]]}}]}"#).unwrap();
    assert_eq!(code(&qwk(&["entangle", "--family", bad.to_str().unwrap(), "--seed", "0"])), 2);
    assert_eq!(code(&qwk(&["entangle", "--family", "specs/bsc_pair.json", "--seed", "0"])), 3);
    assert_eq!(code(&qwk(&["entangle", "--family", "specs/identity_family.json"])), 4);
    assert_eq!(code(&qwk(&["entangle", "--family", "specs/missing.json", "--seed", "0"])), 2);
}

#[test]
fn verify_suites() {
    let o = qwk(&["verify", "typicality"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let table = stdout(&o);
    for id in ["te1", "te2", "te3", "te4", "te5", "te6", "te7"] {
        assert!(table.lines().any(|l| l.contains(id) && l.ends_with("pass")), "{id}\n{table}");
    }
    assert_eq!(code(&qwk(&["verify", "bogus"])), 4);

    let d = doc(&["verify", "all", "--seed", "2"]);
    let suites = d["report"]["suites"].as_array().unwrap();
    assert_eq!(suites.len(), 5);
    let sum: u64 = suites.iter().map(|s| s["checks"].as_u64().unwrap()).sum();
    assert_eq!(d["report"]["checks"].as_u64().unwrap(), sum);
    assert_eq!(d["report"]["pass"], true);
}

#[test]
fn help_version_and_jobs() {
    assert_eq!(code(&qwk(&["--help"])), 0);
    assert_eq!(code(&qwk(&["--version"])), 0);
    assert_eq!(code(&qwk(&["frobnicate"])), 4);
    assert_eq!(code(&qwk(&["--jobs", "0", "verify", "gentle"])), 4);
    let one = doc(&["--jobs", "1", "verify", "fannes", "--seed", "5"]);
    let many = doc(&["--jobs", "3", "verify", "fannes", "--seed", "5"]);
    assert_eq!(one["report"], many["report"]);
}
