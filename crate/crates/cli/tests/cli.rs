use std::path::{Path, PathBuf};
use std::process::Command;

use mcmp_cli::{evaluate, read_log, run_experiment, sweep, ExperimentConfig, SweepOptions};
use serde_json::{json, Value};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str, out: &Path) -> ExperimentConfig {
    let text = std::fs::read_to_string(configs_dir().join(name)).unwrap();
    let mut cfg = ExperimentConfig::from_json(&text).unwrap();
    cfg.output_dir = out.to_path_buf();
    cfg
}

fn write_config(dir: &Path, v: &Value) -> PathBuf {
    let p = dir.join("cfg.json");
    std::fs::write(&p, serde_json::to_string(v).unwrap()).unwrap();
    p
}

fn mcmp(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_mcmp")).args(args).env_remove("MCMP_SEED").output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into(), String::from_utf8_lossy(&out.stderr).into())
}

#[test]
fn growth_of_hyperbolic_space() {
    let dir = tempfile::tempdir().unwrap();
    let rec = run_experiment(&load("growth_h3.json", dir.path())).unwrap();
    let v = rec.summary["value"].as_f64().unwrap();
    assert!((v - 2.0).abs() < 0.05, "{v}");
    assert_eq!(read_log(&dir.path().join("runs.jsonl")).unwrap().len(), 1);
}

#[test]
fn unknown_experiment_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), &json!({"experiment": "foo", "output_dir": dir.path()}));
    let (code, out, _) = mcmp(&["run", "-c", p.to_str().unwrap()]);
    assert_eq!(code, 2);
    let payload: Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(payload["path"], "experiment");
}

#[test]
fn missing_field_reports_its_path() {
    let cfg = ExperimentConfig::from_json(r#"{"experiment": "growth", "params": {"manifold": {"dim": 2, "warping": {"kind": "euclidean"}}}}"#).unwrap();
    match evaluate(&cfg) {
        Err(mcmp_cli::CliError::Schema { path, message }) => {
            assert_eq!(path, "params");
            assert!(message.contains("mu"), "{message}");
        }
        other => panic!("{:?}", other.err()),
    }
    let cfg = ExperimentConfig::from_json(
        r#"{"experiment": "grid-solve", "params": {"domain": {"kind": "unit_square", "n": "x"}, "equation": {"kind": "pmc", "H": {"kind": "constant", "params": {"value": 0.0}}}, "boundary": {"kind": "constant", "value": 0}}}"#,
    )
    .unwrap();
    match evaluate(&cfg) {
        Err(mcmp_cli::CliError::Schema { path, .. }) => assert!(path.starts_with("params.domain"), "{path}"),
        other => panic!("{:?}", other.err()),
    }
}

#[test]
fn numeric_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(
        dir.path(),
        &json!({
            "experiment": "critical-h",
            "params": {"manifold": {"dim": 2, "warping": {"kind": "hyperbolic"}}, "H": -1.0},
            "output_dir": dir.path(),
        }),
    );
    let (code, out, _) = mcmp(&["run", "-c", p.to_str().unwrap()]);
    assert_eq!(code, 3);
    let payload: Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(payload["error"], "numeric");
    assert_eq!(payload["payload"]["kind"], "parameter");
}

#[test]
fn every_example_config_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut names: Vec<_> = std::fs::read_dir(configs_dir()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert!(names.len() >= 10);
    for name in names {
        let a = run_experiment(&load(&name, dir.path())).unwrap();
        let b = run_experiment(&load(&name, dir.path())).unwrap();
        assert_eq!(a.summary_digest, b.summary_digest, "{name}");
        assert_eq!(a.config_digest, b.config_digest, "{name}");
    }
}

#[test]
fn seed_override_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load("comparison.json", dir.path());
    let p = write_config(dir.path(), &serde_json::to_value(&cfg).unwrap());
    let out = Command::new(env!("CARGO_BIN_EXE_mcmp"))
        .args(["run", "-c", p.to_str().unwrap()])
        .env("MCMP_SEED", "99")
        .output()
        .unwrap();
    assert!(out.status.success());
    let recs = read_log(&dir.path().join("runs.jsonl")).unwrap();
    let mut seeded = cfg.clone();
    seeded.seed = 99;
    assert_eq!(recs[0].config_digest, seeded.digest());
    assert_ne!(recs[0].config_digest, cfg.digest());
}

#[test]
fn radial_sweep_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load("radial_shoot.json", dir.path());
    let rows = sweep(&cfg, "params.problem.u0", &[0.0, 0.1, 4.0], SweepOptions { parallel: false, bisect: 0 }).unwrap();
    let st: Vec<&str> = rows.iter().map(|r| r.record.as_ref().unwrap().summary["status"].as_str().unwrap()).collect();
    assert_eq!(st, ["complete", "complete", "blowup"]);
    assert_eq!(rows[0].record.as_ref().unwrap().summary["sup_abs_u"], json!(0.0));
}

#[test]
fn critical_h_sweep_flips_near_one_half() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load("critical_h_h2.json", dir.path());
    let rows = sweep(&cfg, "params.H", &[0.3, 0.4, 0.48, 0.52, 0.6, 0.7], SweepOptions { parallel: true, bisect: 0 }).unwrap();
    let ex: Vec<bool> = rows.iter().map(|r| r.record.as_ref().unwrap().summary["exists"].as_bool().unwrap()).collect();
    assert_eq!(ex, [true, true, true, false, false, false]);
    assert_eq!(read_log(&dir.path().join("runs.jsonl")).unwrap().len(), 6);
}

#[test]
fn empty_sweep_and_missing_axis() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load("critical_h_h2.json", dir.path());
    let p = write_config(dir.path(), &serde_json::to_value(&cfg).unwrap());
    let (code, out, _) = mcmp(&["sweep", "-c", p.to_str().unwrap(), "--axis", "params.H", "--values", ""]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 1);
    let (code, _, _) = mcmp(&["sweep", "-c", p.to_str().unwrap(), "--axis", "params.missing", "--values", "1"]);
    assert_eq!(code, 2);
}

#[test]
fn sweep_child_failures_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load("critical_h_h2.json", dir.path());
    let rows = sweep(&cfg, "params.H", &[-1.0, 0.6], SweepOptions { parallel: false, bisect: 0 }).unwrap();
    assert!(!rows[0].ok && rows[0].error.is_some());
    assert!(rows[1].ok);
}

#[test]
fn report_tables_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = mcmp(&["report", "-l", dir.path().join("runs.jsonl").to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(err.contains("warning"));
    run_experiment(&load("replay_flow.json", dir.path())).unwrap();
    run_experiment(&load("comparison.json", dir.path())).unwrap();
    let rep = mcmp_cli::report::report(&dir.path().join("runs.jsonl"), None, &dir.path().join("report")).unwrap();
    assert!(rep.warnings.is_empty());
    assert_eq!(rep.plots.len(), 1);
    let svg = std::fs::read_to_string(&rep.plots[0]).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
    let comparison: Vec<&str> = rep.text.lines().skip_while(|l| !l.starts_with("== comparison")).skip(3).take(4).collect();
    assert_eq!(comparison.len(), 4);
    assert!(comparison.iter().all(|l| l.trim_end().ends_with("true")), "{comparison:?}");
}
