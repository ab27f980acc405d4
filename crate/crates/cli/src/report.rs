//! Tables and plots from a run log.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::svg::{line_plot, Series};
use crate::{read_log, CliError, RunRecord};

#[derive(Debug, Default)]
pub struct Report {
    pub text: String,
    pub plots: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

fn cell(v: Option<&Value>) -> String {
    match v {
        None | Some(Value::Null) => "-".into(),
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => match n.as_f64() {
            Some(x) if x != 0.0 && (x.abs() < 1e-3 || x.abs() >= 1e5) => format!("{x:.4e}"),
            Some(x) if x.fract() != 0.0 => format!("{x:.6}"),
            _ => n.to_string(),
        },
        Some(other) => other.to_string(),
    }
}

fn table(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: Vec<&str>| {
        cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect::<Vec<_>>().join("  ").trim_end().to_string()
    };
    let _ = writeln!(out, "{}", line(header.to_vec()));
    let _ = writeln!(out, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
    for r in rows {
        let _ = writeln!(out, "{}", line(r.iter().map(|s| s.as_str()).collect()));
    }
    out.push('\n');
}

fn read_csv(path: &Path) -> Option<(Vec<String>, Vec<Vec<String>>)> {
    let text = fs::read_to_string(path).ok()?;
    let mut lines = text.lines();
    let header = lines.next()?.split(',').map(String::from).collect();
    Some((header, lines.map(|l| l.split(',').map(String::from).collect()).collect()))
}

fn column(rows: &[Vec<String>], i: usize) -> Vec<f64> {
    rows.iter().map(|r| r.get(i).and_then(|s| s.parse().ok()).unwrap_or(f64::NAN)).collect()
}

fn plot_record(rec: &RunRecord, idx: usize, out_dir: &Path, rep: &mut Report) -> Result<(), CliError> {
    for o in &rec.outputs {
        let p = Path::new(o);
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
        let spec = match name {
            "trace.csv" => Some(("volume of U_t", "t", "log vol", "log vol(U_t)", 1, Some(2))),
            "shell.csv" => Some(("shell function", "t", "rate", "G'(t)", 1, Some(2))),
            "q.csv" => Some(("flux ratio", "r", "q", "q(r)", 1, None)),
            _ => None,
        };
        let Some((title, xl, yl, name_a, ia, ib)) = spec else { continue };
        let Some((_, rows)) = read_csv(p) else {
            rep.warnings.push(format!("missing artifact {o}"));
            continue;
        };
        let x = column(&rows, 0);
        let a = column(&rows, ia);
        let b = ib.map(|i| column(&rows, i));
        let mut series = vec![Series { name: name_a, x: &x, y: &a, dashed: false }];
        if let Some(b) = &b {
            series.push(Series { name: "lower bound", x: &x, y: b, dashed: true });
        }
        let svg = line_plot(&format!("{title} ({})", rec.experiment), xl, yl, &series);
        fs::create_dir_all(out_dir)?;
        let path = out_dir.join(format!("{:03}-{}-{}.svg", idx, rec.experiment, name.trim_end_matches(".csv")));
        fs::write(&path, svg)?;
        rep.plots.push(path);
    }
    Ok(())
}

/// Builds the report for records matching `selector` (an experiment name;
/// `None` selects all).
pub fn report(log: &Path, selector: Option<&str>, out_dir: &Path) -> Result<Report, CliError> {
    let mut rep = Report::default();
    if !log.exists() {
        rep.warnings.push(format!("run log {} not found; empty report", log.display()));
        return Ok(rep);
    }
    let records: Vec<RunRecord> = read_log(log)?.into_iter().filter(|r| selector.is_none_or(|s| r.experiment == s)).collect();
    if records.is_empty() {
        rep.warnings.push("no matching runs; empty report".into());
        return Ok(rep);
    }
    let mut groups: BTreeMap<&str, Vec<(usize, &RunRecord)>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        groups.entry(r.experiment.as_str()).or_default().push((i, r));
    }
    for (exp, recs) in &groups {
        let _ = writeln!(rep.text, "== {exp} ({} runs)", recs.len());
        if recs.iter().any(|(_, r)| r.summary.get("pairs").is_some_and(|v| v.is_array())) {
            let mut rows = Vec::new();
            for (_, r) in recs {
                for p in r.summary["pairs"].as_array().into_iter().flatten() {
                    rows.push(vec![
                        r.config_digest[..8].to_string(),
                        cell(p.get("pair")),
                        cell(p.get("max_interior_diff")),
                        cell(p.get("max_boundary_diff")),
                        cell(p.get("pass")),
                    ]);
                }
            }
            table(&mut rep.text, &["config", "pair", "max_interior(u-v)", "max_boundary(u-v)", "pass"], &rows);
        } else if recs.iter().any(|(_, r)| r.summary.get("claimed_bound").is_some() || r.summary.get("hypothesis_violation").is_some()) {
            let rows: Vec<Vec<String>> = recs
                .iter()
                .map(|(_, r)| {
                    let s = &r.summary;
                    let hv = s.get("hypothesis_violation").and_then(|h| h.get("hypothesis")).map(|h| cell(Some(h)));
                    vec![
                        r.config_digest[..8].to_string(),
                        cell(s.get("theorem_id")),
                        cell(s.get("observed_value")),
                        cell(s.get("claimed_bound")),
                        cell(s.get("pass")),
                        hv.unwrap_or_else(|| "-".into()),
                    ]
                })
                .collect();
            table(&mut rep.text, &["config", "theorem", "observed", "claimed", "pass", "hypothesis violated"], &rows);
        } else {
            let mut keys: Vec<String> = Vec::new();
            for (_, r) in recs {
                if let Value::Object(m) = &r.summary {
                    for (k, v) in m {
                        if !v.is_array() && !v.is_object() && !keys.contains(k) {
                            keys.push(k.clone());
                        }
                    }
                }
            }
            keys.sort();
            let mut header = vec!["config"];
            header.extend(keys.iter().map(|k| k.as_str()));
            let rows: Vec<Vec<String>> = recs
                .iter()
                .map(|(_, r)| {
                    let mut row = vec![r.config_digest[..8].to_string()];
                    row.extend(keys.iter().map(|k| cell(r.summary.get(k))));
                    row
                })
                .collect();
            table(&mut rep.text, &header, &rows);
        }
        for (i, r) in recs {
            plot_record(r, *i, out_dir, &mut rep)?;
        }
    }
    Ok(rep)
}
