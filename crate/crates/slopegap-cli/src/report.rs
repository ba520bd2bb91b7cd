//! Output plumbing: the JSON report envelope and plain CSV tables.

use serde::Serialize;
use serde_json::{json, Value};
use std::io::Write;
use std::path::{Path, PathBuf};

/// Version of the report layout described by `schema/report.schema.json`.
pub const REPORT_FORMAT: &str = "slopegap-report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Effective settings of one invocation, echoed into every report.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub target: Option<String>,
    pub engine: Option<String>,
    pub mode: Option<String>,
    pub grid: Option<Vec<f64>>,
    pub n: Option<usize>,
    pub seed: u64,
    pub workers: usize,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub extra: serde_json::Map<String, Value>,
}

pub fn envelope<R: Serialize>(config: &RunConfig, results: &R, counterexamples: Value) -> Value {
    json!({
        "config": config,
        "results": results,
        "counterexamples": counterexamples,
        "versions": { "spec": REPORT_FORMAT, "build": env!("CARGO_PKG_VERSION") },
    })
}

/// Rows of stringified cells under a fixed header.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
    }
}

pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn emit(out: Option<&Path>, text: &str) -> std::io::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes())?;
            so.flush()
        }
    }
}

pub fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

/// `tail.csv` -> `tail.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

/// Gnuplot script plotting every data column of `csv` against the first.
pub fn gnuplot_script(csv: &Path, header: &[&str], title: &str) -> String {
    let name = csv.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set key autotitle columnhead\n");
    s.push_str(&format!("set title '{title}'\n"));
    s.push_str(&format!("set xlabel '{}'\n", header.first().copied().unwrap_or("x")));
    s.push_str("set grid\n");
    let plots: Vec<String> = (2..=header.len()).map(|c| format!("'{name}' using 1:{c} with lines")).collect();
    s.push_str(&format!("plot {}\n", plots.join(", \\\n     ")));
    s
}
