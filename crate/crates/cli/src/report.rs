//! Result tables, checks and the per-run summary document.

use std::fs;
use std::path::Path;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use bergeo::path::GridSpec;
use serde::Serialize;

use crate::CliError;

/// A delimited-text table. The first two columns of every row are the
/// producing operation and the grid it ran on.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&'static str]) -> Self {
        let mut all = vec!["op", "grid"];
        all.extend_from_slice(columns);
        Self {
            name: name.into(),
            columns: all,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, op: &str, grid: &str, values: Vec<String>) {
        let mut row = vec![op.to_string(), grid.to_string()];
        row.extend(values);
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    fn write(&self, dir: &Path) -> Result<(), CliError> {
        let path = dir.join(self.file_name());
        let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        w.write_record(&self.columns).map_err(|e| CliError::Io(e.to_string()))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| CliError::Io(e.to_string()))?;
        }
        w.flush().map_err(|e| CliError::Io(e.to_string()))
    }
}

pub fn grid_tag(g: &GridSpec) -> String {
    format!("t{}x{}@{}", g.t_nodes, g.x_nodes, g.x_max)
}

pub fn quad_tag(nodes: usize) -> String {
    format!("q{nodes}")
}

/// Formats a float so that it reads back exactly.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            value,
            tolerance,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub version: &'static str,
    pub started_unix: u64,
    pub elapsed_seconds: f64,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct TableEntry<'a> {
    name: &'a str,
    file: String,
    rows: usize,
    columns: &'a [&'static str],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub command: &'static str,
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl RunReport {
    pub fn new(command: &'static str) -> Self {
        Self {
            command,
            tables: Vec::new(),
            checks: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Writes every table and `summary.json` into `dir`, creating it.
    pub fn write(&self, dir: &Path, config_hash: &str, started: SystemTime, elapsed: Duration, threads: usize) -> Result<(), CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        for t in &self.tables {
            t.write(dir)?;
        }
        let summary = serde_json::json!({
            "command": self.command,
            "passed": self.passed(),
            "tables": self.tables.iter().map(|t| TableEntry {
                name: &t.name,
                file: t.file_name(),
                rows: t.rows.len(),
                columns: &t.columns,
            }).collect::<Vec<_>>(),
            "checks": self.checks,
            "notes": self.notes,
            "provenance": Provenance {
                config_hash: config_hash.to_string(),
                version: env!("CARGO_PKG_VERSION"),
                started_unix: started.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
                elapsed_seconds: elapsed.as_secs_f64(),
                threads,
            },
        });
        let path = dir.join("summary.json");
        let text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Io(e.to_string()))?;
        fs::write(&path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }
}
