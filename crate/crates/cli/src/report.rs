//! Report artifacts: one JSON summary, one CSV per table, one SVG per plot.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Map, Value};

use crate::config::ExperimentConfig;
use crate::RunError;

#[derive(Clone, Debug)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.iter().map(|c| csv_field(c)).collect::<Vec<_>>().join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.iter().map(|c| csv_field(c)).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Shortest round-trip formatting, so tables are bit-exact.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct Plot {
    pub name: String,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

impl Plot {
    pub fn new(name: &str, title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            name: name.into(),
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            log_x: false,
            log_y: false,
            series: Vec::new(),
        }
    }

    pub fn log_log(mut self) -> Self {
        self.log_x = true;
        self.log_y = true;
        self
    }

    pub fn add(&mut self, label: impl Into<String>, points: Vec<(f64, f64)>) {
        self.series.push(Series { label: label.into(), points });
    }
}

/// Result of one experiment before it is written out.
#[derive(Clone, Debug)]
pub struct Report {
    pub results: Map<String, Value>,
    pub tables: Vec<Table>,
    pub plots: Vec<Plot>,
    /// `PASS`, `FAIL` or `INCONCLUSIVE`, possibly qualified.
    pub verdict: String,
    /// Violated contracts; a non-empty list makes the run exit with status 4.
    pub violations: Vec<String>,
}

impl Report {
    pub fn new() -> Self {
        Self {
            results: Map::new(),
            tables: Vec::new(),
            plots: Vec::new(),
            verdict: "PASS".into(),
            violations: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: Value) {
        self.results.insert(key.to_string(), value);
    }
}

impl Default for Report {
    fn default() -> Self {
        Self::new()
    }
}

/// Files written by [`write_report`], in writing order.
#[derive(Clone, Debug)]
pub struct Written {
    pub summary: PathBuf,
    pub csv: Vec<PathBuf>,
    pub svg: Vec<PathBuf>,
}

/// Summary JSON. Only the `timestamp_unix` line in the header changes
/// between identical runs.
pub fn summary_json(cfg: &ExperimentConfig, report: &Report, workers: usize) -> Result<String, RunError> {
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let config = serde_json::to_value(cfg).map_err(|e| RunError::Contract(e.to_string()))?;
    let body = json!({
        "kind": cfg.kind.name(),
        "verdict": report.verdict,
        "contract_violations": report.violations,
        "provenance": {
            "grid": {
                "dim": cfg.grid.dim,
                "half_width": cfg.grid.half_width,
                "points_per_axis": cfg.grid.points_per_axis,
            },
            "family_policy": cfg.family.policy().to_string(),
            "probe_recipe": config.get("probes").cloned().unwrap_or(Value::Null),
            "tolerance": cfg.tolerance,
            "seed": cfg.seed,
            "workers": workers,
        },
        "config": config,
        "results": Value::Object(report.results.clone()),
        "artifacts": {
            "csv": report.tables.iter().map(|t| format!("{}.csv", t.name)).collect::<Vec<_>>(),
            "svg": report.plots.iter().map(|p| format!("{}.svg", p.name)).collect::<Vec<_>>(),
        },
    });
    let pretty = serde_json::to_string_pretty(&body).map_err(|e| RunError::Contract(e.to_string()))?;
    let mut out = String::new();
    writeln!(out, "{{").expect("string write");
    writeln!(
        out,
        "  \"header\": {{ \"tool\": \"wmix {}\", \"timestamp_unix\": {stamp} }},",
        env!("CARGO_PKG_VERSION")
    )
    .expect("string write");
    // Splice the body's members after the header line.
    out.push_str(pretty.trim_start_matches('{').trim_start_matches('\n'));
    out.push('\n');
    Ok(out)
}

pub fn write_report(
    cfg: &ExperimentConfig,
    report: &Report,
    dir: &Path,
    workers: usize,
) -> Result<Written, RunError> {
    fs::create_dir_all(dir).map_err(|e| RunError::Precondition(format!("{}: {e}", dir.display())))?;
    let io = |p: &Path, e: std::io::Error| RunError::Precondition(format!("{}: {e}", p.display()));
    let summary = dir.join("summary.json");
    fs::write(&summary, summary_json(cfg, report, workers)?).map_err(|e| io(&summary, e))?;
    let mut csv = Vec::new();
    for t in &report.tables {
        let path = dir.join(format!("{}.csv", t.name));
        fs::write(&path, t.to_csv()).map_err(|e| io(&path, e))?;
        csv.push(path);
    }
    let mut svg = Vec::new();
    for p in &report.plots {
        let path = dir.join(format!("{}.svg", p.name));
        fs::write(&path, crate::svg::render(p)).map_err(|e| io(&path, e))?;
        svg.push(path);
    }
    Ok(Written { summary, csv, svg })
}
