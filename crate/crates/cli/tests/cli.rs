use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cascade-sim"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_config(name: &str, extra: &[&str]) -> (i32, String, String) {
    let path = config(name);
    let mut args = vec!["run", path.to_str().unwrap(), "--quiet"];
    args.extend_from_slice(extra);
    let out = run(&args);
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn write_temp(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

/// Data rows of a CSV with `#` comment lines, as (header, rows).
fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines
        .next()
        .unwrap_or_default()
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let k = header.iter().position(|h| h == name).expect("column present");
    rows.iter().map(|r| r[k].parse().unwrap()).collect()
}

fn without_timestamp(text: &str) -> String {
    text.lines()
        .filter(|l| !l.contains("generated_at_unix"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn version_command() {
    let out = run(&["version"]);
    assert!(out.status.success());
    let s = String::from_utf8(out.stdout).unwrap();
    assert!(s.starts_with("cascade-sim "));
    assert!(s.contains("cascade-core"));
}

#[test]
fn every_shipped_config_validates() {
    let dir = config("");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "json") {
            let out = run(&["validate", p.to_str().unwrap()]);
            assert!(out.status.success(), "{}: {}", p.display(), String::from_utf8_lossy(&out.stderr));
            n += 1;
        }
    }
    assert!(n >= 10);
}

#[test]
fn two_atom_cat_probability() {
    let (code, out, _) = run_config("two_atom_cat.json", &[]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let p = v["result"]["success_probability"].as_f64().unwrap();
    assert!((p - (1.0 + (-4.0f64).exp()) / 2.0).abs() < 1e-12);
    assert!(v["result"]["target_overlap"].as_f64().unwrap() >= 1.0 - 1e-12);
    assert_eq!(v["provenance"]["kind"], "protocol");
    assert_eq!(v["provenance"]["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn validity_example_passes_trap_ratio() {
    let (code, out, _) = run_config("validity_v5MHz.json", &[]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let entry = v["result"]["entries"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["name"] == "trap_over_kappa")
        .unwrap()
        .clone();
    assert!((entry["ratio"].as_f64().unwrap() - 10.0).abs() < 1e-9);
    assert_eq!(entry["verdict"], "pass");
}

#[test]
fn coherent_transfer_config() {
    let (code, out, _) = run_config("transfer_alpha1.json", &[]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v["result"]["fidelity"].as_f64().unwrap() >= 0.99);
    assert!(v["provenance"]["tolerances"]["rel_tol"].is_number());
}

#[test]
fn loss_sweep_is_monotone_and_deterministic() {
    let (code, a, _) = run_config("sweep_loss.json", &["--jobs", "4"]);
    assert_eq!(code, 0);
    let (header, rows) = csv_rows(&a);
    assert_eq!(
        &header[..7],
        ["alpha", "eta_p", "GammaT", "n_max", "fidelity", "residual_n1", "emitted_photons"]
    );
    let f = column(&header, &rows, "fidelity");
    assert_eq!(f.len(), 4);
    assert!(f.windows(2).all(|w| w[1] <= w[0]), "{f:?}");
    let (_, b, _) = run_config("sweep_loss.json", &["--jobs", "1"]);
    assert_eq!(without_timestamp(&a), without_timestamp(&b));
}

#[test]
fn window_sweep_fidelity_nondecreasing_per_input() {
    let (code, out, _) = run_config("sweep_window.json", &[]);
    assert_eq!(code, 0);
    let (header, rows) = csv_rows(&out);
    let f = column(&header, &rows, "fidelity");
    assert_eq!(f.len(), 6);
    for chunk in f.chunks(3) {
        assert!(chunk.windows(2).all(|w| w[1] >= w[0]), "{chunk:?}");
    }
}

#[test]
fn empty_grid_gives_header_only() {
    let (code, out, _) = run_config("sweep_empty.json", &[]);
    assert_eq!(code, 0);
    let (header, rows) = csv_rows(&out);
    assert_eq!(header[0], "alpha");
    assert!(rows.is_empty());
}

#[test]
fn out_flag_and_format_override() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("cat.csv");
    let cfg = config("two_atom_cat.json");
    let out = run(&[
        "run",
        cfg.to_str().unwrap(),
        "--format",
        "csv",
        "--out",
        target.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(target).unwrap();
    assert!(text.contains("# config_sha256: "));
    assert!(text.contains("measure_internal"));
}

#[test]
fn unknown_key_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_temp(
        &dir,
        "bad.json",
        r#"{"kind": "transfer", "input": {"fock": 1}, "n_max": 4, "gama_t": 10}"#,
    );
    let out = run(&["run", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("config"), "{err}");
    let out = run(&["validate", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn oversized_grid_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let etas = vec!["0.5"; 101].join(",");
    let gts = vec!["10"; 100].join(",");
    let body = format!(r#"{{"kind": "sweep", "inputs": [{{"fock": 1}}], "eta_p": [{etas}], "gamma_t": [{gts}], "n_max": [4]}}"#);
    let p = write_temp(&dir, "big.json", &body);
    let out = run(&["sweep", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn truncation_failure_is_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_temp(
        &dir,
        "trunc.json",
        r#"{"kind": "transfer", "input": {"coherent": [2.0, 0.0]}, "n_max": 8}"#,
    );
    let out = run(&["run", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("hilbert"), "{err}");
}

#[test]
fn guard_failure_is_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_temp(
        &dir,
        "loose.json",
        r#"{"kind": "transfer", "input": {"coherent": [1.0, 0.0]}, "n_max": 12,
            "tolerances": {"rel_tol": 1e-3, "abs_tol": 1e-3, "positivity_guard": 1e-14, "trace_guard": 1e-14}}"#,
    );
    let out = run(&["run", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("dynamics"), "{err}");
}

#[test]
fn occupied_sink_is_protocol_error() {
    let text = std::fs::read_to_string(config("script_two_atom.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let steps = v["scenario"]["steps"].as_array_mut().unwrap();
    steps.insert(1, serde_json::json!({"op": "transfer", "from": 0, "to": 1}));
    let dir = tempfile::tempdir().unwrap();
    let p = write_temp(&dir, "twice.json", &v.to_string());
    let out = run(&["run", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("protocol") && err.contains("ideal_transfer"), "{err}");
}

#[test]
fn non_unitary_rotation_is_protocol_error() {
    let text = std::fs::read_to_string(config("script_two_atom.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["scenario"]["steps"][1]["rotation"] = serde_json::json!({"matrix": [[[1, 0], [1, 0]], [[0, 0], [1, 0]]]});
    let dir = tempfile::tempdir().unwrap();
    let p = write_temp(&dir, "nonunitary.json", &v.to_string());
    let out = run(&["run", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn sweep_command_rejects_other_kinds() {
    let cfg = config("two_atom_cat.json");
    let out = run(&["sweep", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn protocol_json_is_reproducible() {
    let (_, a, _) = run_config("ghz.json", &[]);
    let (_, b, _) = run_config("ghz.json", &[]);
    assert_eq!(without_timestamp(&a), without_timestamp(&b));
}
