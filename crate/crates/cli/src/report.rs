//! Consolidated summaries of one run directory or a directory of runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::SCHEMA_VERSION;
use crate::error::{CliError, Result};
use crate::output::{sha256_hex, RunManifest, MANIFEST, SUMMARY};
use crate::run::Summary;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportRow {
    pub run: String,
    pub experiment: usize,
    pub name: String,
    pub value: Option<f64>,
    pub predicted: Option<f64>,
    /// `pass`, `fail` or `info`.
    pub verdict: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    /// Rows grouped by experiment kind, kinds and runs in sorted order.
    pub sections: BTreeMap<String, Vec<ReportRow>>,
    pub passed: bool,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

/// Run directories under `dir`: itself if it holds a manifest, otherwise
/// its immediate subdirectories that do, sorted by name.
fn run_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    if dir.join(MANIFEST).is_file() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.join(MANIFEST).is_file() {
            out.push(path);
        }
    }
    if out.is_empty() {
        return Err(CliError::Integrity(format!("no manifest under {}", dir.display())));
    }
    out.sort();
    Ok(out)
}

/// Reads and verifies one run: schema version, then every inventoried
/// file's size and hash.
pub fn verify_run(dir: &Path) -> Result<(RunManifest, Summary)> {
    let bytes = read(&dir.join(MANIFEST))?;
    let raw: serde_json::Value = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Integrity(format!("corrupt manifest in {}: {e}", dir.display())))?;
    let version = raw.get("schema_version").and_then(|v| v.as_u64()).unwrap_or(0);
    if version > u64::from(SCHEMA_VERSION) {
        return Err(CliError::Schema(format!(
            "{} has schema version {version}, newest known is {SCHEMA_VERSION}",
            dir.display()
        )));
    }
    let manifest: RunManifest = serde_json::from_value(raw)
        .map_err(|e| CliError::Integrity(format!("corrupt manifest in {}: {e}", dir.display())))?;
    for out in &manifest.outputs {
        let path = dir.join(&out.path);
        let data = fs::read(&path)
            .map_err(|_| CliError::Integrity(format!("{} is missing", path.display())))?;
        if data.len() as u64 != out.bytes || sha256_hex(&data) != out.sha256 {
            return Err(CliError::Integrity(format!("{} does not match its hash", path.display())));
        }
    }
    if !manifest.outputs.iter().any(|o| o.path == SUMMARY) {
        return Err(CliError::Integrity(format!("{} lists no summary", dir.display())));
    }
    let summary: Summary = serde_json::from_slice(&read(&dir.join(SUMMARY))?)
        .or_else(|_| lenient_summary(&dir.join(SUMMARY)))?;
    Ok((manifest, summary))
}

/// Summaries with non-finite metrics carry `null`; read those as NaN.
fn lenient_summary(path: &Path) -> Result<Summary> {
    let mut v: serde_json::Value = serde_json::from_slice(&read(path)?)?;
    if let Some(exps) = v.get_mut("experiments").and_then(|e| e.as_array_mut()) {
        for e in exps {
            if let Some(m) = e.get_mut("metrics").and_then(|m| m.as_object_mut()) {
                m.retain(|_, x| !x.is_null());
            }
        }
    }
    Ok(serde_json::from_value(v)?)
}

pub fn build_report(dir: &Path) -> Result<Report> {
    let mut sections: BTreeMap<String, Vec<ReportRow>> = BTreeMap::new();
    let mut passed = true;
    for run in run_dirs(dir)? {
        let (manifest, summary) = verify_run(&run)?;
        let name = run.file_name().map_or_else(|| run.display().to_string(), |n| n.to_string_lossy().into());
        passed &= summary.passed;
        let rows = sections.entry(manifest.kind.clone()).or_default();
        for e in &summary.experiments {
            for v in &e.verdicts {
                rows.push(ReportRow {
                    run: name.clone(),
                    experiment: e.index,
                    name: v.name.clone(),
                    value: Some(v.value),
                    predicted: v.predicted,
                    verdict: match v.pass {
                        Some(true) => "pass",
                        Some(false) => "fail",
                        None => "info",
                    }
                    .into(),
                });
            }
            for (k, v) in &e.metrics {
                if e.verdicts.iter().any(|x| &x.name == k) {
                    continue;
                }
                rows.push(ReportRow {
                    run: name.clone(),
                    experiment: e.index,
                    name: k.clone(),
                    value: Some(*v),
                    predicted: None,
                    verdict: "info".into(),
                });
            }
        }
        for c in &summary.checks {
            rows.push(ReportRow {
                run: name.clone(),
                experiment: c.experiment,
                name: format!("check:{}", c.metric),
                value: c.value,
                predicted: None,
                verdict: if c.pass { "pass" } else { "fail" }.into(),
            });
        }
    }
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        sections,
        passed,
    })
}

pub fn render(report: &Report) -> String {
    let num = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{v:.6}"));
    let mut s = String::new();
    for (kind, rows) in &report.sections {
        let _ = writeln!(s, "== {kind} ==");
        let _ = writeln!(s, "{:<32} {:>3} {:<24} {:>14} {:>14}  verdict", "run", "exp", "quantity", "value", "predicted");
        for r in rows {
            let _ = writeln!(
                s,
                "{:<32} {:>3} {:<24} {:>14} {:>14}  {}",
                r.run,
                r.experiment,
                r.name,
                num(r.value),
                num(r.predicted),
                r.verdict
            );
        }
        s.push('\n');
    }
    let _ = writeln!(s, "overall: {}", if report.passed { "pass" } else { "fail" });
    s
}
