//! Experiment runner: validated JSON configs in, summaries, artifacts and an
//! append-only run log out.

pub mod config;
pub mod experiments;
pub mod report;
pub mod svg;

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use config::ExperimentConfig;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const RUN_LOG: &str = "runs.jsonl";

#[derive(Debug)]
pub enum CliError {
    Schema { path: String, message: String },
    Numeric(mcmp_core::Error),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema { .. } => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 1,
        }
    }

    /// Machine-readable error payload.
    pub fn payload(&self) -> Value {
        match self {
            CliError::Schema { path, message } => serde_json::json!({"error": "schema", "path": path, "message": message}),
            CliError::Numeric(e) => serde_json::json!({"error": "numeric", "payload": e, "message": e.to_string()}),
            CliError::Io(m) => serde_json::json!({"error": "io", "message": m}),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Schema { path, message } => write!(f, "schema error at {path}: {message}"),
            CliError::Numeric(e) => write!(f, "numerical failure: {e}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<mcmp_core::Error> for CliError {
    fn from(e: mcmp_core::Error) -> Self {
        CliError::Numeric(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub experiment: String,
    pub config_digest: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub artifact_version: String,
    pub outputs: Vec<String>,
    pub summary: Value,
    pub summary_digest: String,
}

/// Runs without touching the filesystem; returns the summary and artifacts.
pub fn evaluate(cfg: &ExperimentConfig) -> Result<experiments::Outcome, CliError> {
    let plan = cfg.plan()?;
    experiments::execute(&plan, cfg.seed)
}

fn run_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.join(format!("{}-{}", cfg.experiment, &cfg.digest()[..12]))
}

/// Runs one experiment, writes its artifacts and config, and returns the
/// record (not yet appended to the log).
pub fn run_experiment_unlogged(cfg: &ExperimentConfig) -> Result<RunRecord, CliError> {
    let out = evaluate(cfg)?;
    let dir = run_dir(cfg);
    fs::create_dir_all(&dir)?;
    let canonical = mcmp_core::digest::canonical_json(cfg);
    fs::write(dir.join("config.json"), format!("{canonical}\n"))?;
    let mut outputs = vec![dir.join("config.json").display().to_string()];
    for (name, bytes) in &out.files {
        let p = dir.join(name);
        fs::write(&p, bytes)?;
        outputs.push(p.display().to_string());
    }
    let summary_path = dir.join("summary.json");
    fs::write(&summary_path, format!("{}\n", mcmp_core::digest::canonical_json(&out.summary)))?;
    outputs.push(summary_path.display().to_string());
    Ok(RunRecord {
        experiment: cfg.experiment.clone(),
        config_digest: cfg.digest(),
        timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        artifact_version: ARTIFACT_VERSION.into(),
        outputs,
        summary_digest: mcmp_core::digest::digest_of(&out.summary),
        summary: out.summary,
    })
}

pub fn append_record(log: &Path, rec: &RunRecord) -> Result<(), CliError> {
    if let Some(parent) = log.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut f = fs::OpenOptions::new().create(true).append(true).open(log)?;
    writeln!(f, "{}", mcmp_core::digest::canonical_json(rec))?;
    Ok(())
}

/// Runs one experiment and appends its record to `output_dir/runs.jsonl`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunRecord, CliError> {
    let rec = run_experiment_unlogged(cfg)?;
    append_record(&cfg.output_dir.join(RUN_LOG), &rec)?;
    Ok(rec)
}

pub fn read_log(path: &Path) -> Result<Vec<RunRecord>, CliError> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CliError::Schema { path: format!("{}:{}", path.display(), i + 1), message: e.to_string() })
        })
        .collect()
}

/// Replaces the value at a dotted path (`params.H`) in a config; the path
/// must already exist.
pub fn set_path(cfg: &ExperimentConfig, path: &str, value: Value) -> Result<ExperimentConfig, CliError> {
    let mut v = serde_json::to_value(cfg).expect("config serializes");
    let mut cur = &mut v;
    for key in path.split('.') {
        cur = cur
            .get_mut(key)
            .ok_or_else(|| CliError::Schema { path: path.into(), message: format!("axis key {key:?} not found in template") })?;
    }
    *cur = value;
    serde_json::from_value(v).map_err(|e| CliError::Schema { path: path.into(), message: e.to_string() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub ok: bool,
    #[serde(default)]
    pub record: Option<RunRecord>,
    #[serde(default)]
    pub error: Option<Value>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub parallel: bool,
    /// Extra bisection steps on the first flip of `summary.exists`.
    pub bisect: usize,
}

fn sweep_one(template: &ExperimentConfig, axis: &str, value: f64) -> Result<SweepRow, CliError> {
    let cfg = set_path(template, axis, serde_json::json!(value))?;
    Ok(match run_experiment_unlogged(&cfg) {
        Ok(rec) => SweepRow { value, ok: true, record: Some(rec), error: None },
        Err(e @ CliError::Schema { .. }) => return Err(e),
        Err(e) => SweepRow { value, ok: false, record: None, error: Some(e.payload()) },
    })
}

fn exists_flag(row: &SweepRow) -> Option<bool> {
    row.record.as_ref()?.summary.get("exists")?.as_bool()
}

/// One run per value (child failures are recorded per row), optionally
/// followed by bisection of the existence flip. Records are logged in value
/// order regardless of parallelism.
pub fn sweep(template: &ExperimentConfig, axis: &str, values: &[f64], opts: SweepOptions) -> Result<Vec<SweepRow>, CliError> {
    let mut rows: Vec<SweepRow> = if opts.parallel {
        values.par_iter().map(|&v| sweep_one(template, axis, v)).collect::<Result<_, _>>()?
    } else {
        values.iter().map(|&v| sweep_one(template, axis, v)).collect::<Result<_, _>>()?
    };
    if opts.bisect > 0 {
        let flip = rows.windows(2).position(|w| matches!((exists_flag(&w[0]), exists_flag(&w[1])), (Some(a), Some(b)) if a != b));
        if let Some(i) = flip {
            let (mut lo, mut hi) = (rows[i].clone(), rows[i + 1].clone());
            for _ in 0..opts.bisect {
                let mid = sweep_one(template, axis, 0.5 * (lo.value + hi.value))?;
                let Some(m) = exists_flag(&mid) else {
                    rows.push(mid);
                    break;
                };
                if Some(m) == exists_flag(&lo) {
                    lo = mid.clone();
                } else {
                    hi = mid.clone();
                }
                rows.push(mid);
            }
        }
        rows.sort_by(|a, b| a.value.total_cmp(&b.value));
    }
    let log = template.output_dir.join(RUN_LOG);
    for r in &rows {
        if let Some(rec) = &r.record {
            append_record(&log, rec)?;
        }
    }
    Ok(rows)
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

/// `value,ok,<scalar summary fields…>,error` with the union of scalar keys.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut keys = std::collections::BTreeSet::new();
    for r in rows {
        if let Some(Value::Object(m)) = r.record.as_ref().map(|r| &r.summary) {
            for (k, v) in m {
                if !v.is_array() && !v.is_object() {
                    keys.insert(k.clone());
                }
            }
        }
    }
    let mut s = String::from("value,ok");
    for k in &keys {
        s.push(',');
        s.push_str(k);
    }
    s.push_str(",error\n");
    for r in rows {
        s.push_str(&format!("{},{}", r.value, r.ok));
        for k in &keys {
            s.push(',');
            if let Some(v) = r.record.as_ref().and_then(|rec| rec.summary.get(k)) {
                s.push_str(&scalar_text(v));
            }
        }
        s.push(',');
        if let Some(e) = &r.error {
            s.push_str(&scalar_text(e.get("message").unwrap_or(&Value::Null)).replace(',', ";"));
        }
        s.push('\n');
    }
    s
}
