//! Result serialization: JSON/markdown/CSV writers and the run record.
//!
//! Everything written to `--out` files is deterministic for a fixed seed;
//! volatile details (timings) go to stderr via the run record only.
//! Floats serialize as shortest round-trip decimals.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use adaptci_core::simulate::SimReport;

/// One line per run on stderr: enough to replay the invocation.
#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub command: Vec<String>,
    pub version: String,
    pub seed: Option<u64>,
    pub data_sha256: Option<String>,
    pub classes_sha256: Option<String>,
    pub timing_ms: u128,
    pub outputs: Vec<String>,
}

impl RunRecord {
    pub fn new(command: Vec<String>) -> Self {
        Self {
            command,
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: None,
            data_sha256: None,
            classes_sha256: None,
            timing_ms: 0,
            outputs: Vec::new(),
        }
    }

    pub fn emit(&self) {
        match serde_json::to_string(self) {
            Ok(line) => eprintln!("{line}"),
            Err(e) => eprintln!("run record serialization failed: {e}"),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    hex_string(&h.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Per-level diagnostics in CI outputs; levels are 1-based externally.
#[derive(Debug, Serialize)]
pub struct PerLevelOut {
    pub j: usize,
    pub gamma: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub active_points: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct CiOutput {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub length: Option<f64>,
    pub method: String,
    pub tau: Option<f64>,
    pub per_level: Vec<PerLevelOut>,
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Writes pretty JSON (with trailing newline) to a file, or stdout when no
/// path is given.
pub fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<Option<String>> {
    let text = format!("{}\n", serde_json::to_string_pretty(value)?);
    emit_text(&text, out)
}

fn emit_text(text: &str, out: Option<&Path>) -> Result<Option<String>> {
    match out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
            Ok(Some(path.display().to_string()))
        }
        None => {
            print!("{text}");
            Ok(None)
        }
    }
}

/// Which summary column a table reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableMetric {
    Length,
    Coverage,
}

fn scenario_family(label: &str) -> String {
    match label.rfind("-n") {
        Some(pos) if label[pos + 2..].chars().all(|c| c.is_ascii_digit()) => {
            label[..pos].to_string()
        }
        _ => label.to_string(),
    }
}

/// Markdown table mimicking the benchmark layout: one row per sample size,
/// one column per (scenario, method).
pub fn simulate_markdown(reports: &[SimReport], metric: TableMetric) -> String {
    let mut columns: Vec<(String, String)> = Vec::new();
    let mut ns: Vec<usize> = Vec::new();
    for r in reports {
        let fam = scenario_family(&r.label);
        for m in &r.per_method {
            let key = (fam.clone(), m.label.clone());
            if !columns.contains(&key) {
                columns.push(key);
            }
        }
        if !ns.contains(&r.n) {
            ns.push(r.n);
        }
    }
    ns.sort_unstable();

    let title = match metric {
        TableMetric::Length => "Mean CI lengths",
        TableMetric::Coverage => "Coverage probabilities",
    };
    let mut out = String::new();
    let _ = writeln!(out, "# {title}");
    let _ = writeln!(out);
    let mut header = String::from("| n |");
    let mut rule = String::from("|---|");
    for (fam, method) in &columns {
        let _ = write!(header, " {method} [{fam}] |");
        rule.push_str("---|");
    }
    let _ = writeln!(out, "{header}");
    let _ = writeln!(out, "{rule}");
    for n in &ns {
        let mut row = format!("| {n} |");
        for (fam, method) in &columns {
            let cell = reports
                .iter()
                .find(|r| r.n == *n && scenario_family(&r.label) == *fam)
                .and_then(|r| r.per_method.iter().find(|m| &m.label == method))
                .map(|m| match metric {
                    TableMetric::Length => format!("{:.3}", m.mean_length),
                    TableMetric::Coverage => format!("{:.3}", m.coverage),
                })
                .unwrap_or_else(|| "-".into());
            let _ = write!(row, " {cell} |");
        }
        let _ = writeln!(out, "{row}");
    }
    out
}

/// Plot-ready CSV: one row per (scenario, method).
pub fn simulate_csv(reports: &[SimReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "label",
        "n",
        "reps",
        "method",
        "mean_length",
        "se_length",
        "coverage",
        "se_coverage",
        "reps_used",
        "failures",
    ])?;
    for r in reports {
        for m in &r.per_method {
            w.write_record([
                r.label.clone(),
                r.n.to_string(),
                r.reps.to_string(),
                m.label.clone(),
                m.mean_length.to_string(),
                m.se_length.to_string(),
                m.coverage.to_string(),
                m.se_coverage.to_string(),
                m.reps_used.to_string(),
                m.failures.to_string(),
            ])?;
        }
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Dispatches on the `--out` extension: `.json`, `.md`, or `.csv`.
pub fn write_simulate_reports(
    reports: &[SimReport],
    metric: TableMetric,
    out: Option<&Path>,
) -> Result<Option<String>> {
    let ext = out.and_then(|p| p.extension()).and_then(|e| e.to_str()).unwrap_or("json");
    match ext {
        "json" => write_json(&reports, out),
        "md" => emit_text(&simulate_markdown(reports, metric), out),
        "csv" => emit_text(&simulate_csv(reports)?, out),
        other => bail!("unsupported output extension {other:?}; use json, md, or csv"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use adaptci_core::simulate::MethodReport;

    fn fake_report(label: &str, n: usize) -> SimReport {
        SimReport {
            label: label.into(),
            n,
            reps: 10,
            alpha: 0.05,
            seed: 1,
            per_method: vec![MethodReport {
                label: "bonferroni".into(),
                mean_length: 0.925,
                se_length: 0.01,
                coverage: 0.97,
                se_coverage: 0.005,
                reps_used: 10,
                failures: 0,
            }],
            calibration: None,
            wall_time_ms: 123,
        }
    }

    #[test]
    fn markdown_layout() {
        let reports = vec![fake_report("lengths-f1-n100", 100), fake_report("lengths-f1-n1000", 1000)];
        let md = simulate_markdown(&reports, TableMetric::Length);
        assert!(md.contains("| n | bonferroni [lengths-f1] |"), "{md}");
        assert!(md.contains("| 100 | 0.925 |"));
        assert!(md.contains("| 1000 | 0.925 |"));
    }

    #[test]
    fn csv_has_full_precision() {
        let mut r = fake_report("x-n10", 10);
        r.per_method[0].mean_length = 0.1 + 0.2;
        let csv = simulate_csv(&[r]).unwrap();
        assert!(csv.contains("0.30000000000000004"), "{csv}");
    }

    #[test]
    fn sha_is_stable() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
