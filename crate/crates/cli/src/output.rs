//! Report envelopes and artifact writing.

use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::CliError;

/// A CSV table: header plus rows of already formatted fields.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.to_string(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

/// Formats a float with round-trip precision.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

/// The result of one command.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub result: Value,
    pub tables: Vec<Table>,
    /// False when the command ran but a check it performs failed.
    pub passed: bool,
}

impl Artifact {
    pub fn new(result: impl Serialize) -> Result<Self, CliError> {
        Ok(Artifact { result: serde_json::to_value(result)?, tables: Vec::new(), passed: true })
    }

    pub fn with_table(mut self, t: Table) -> Self {
        self.tables.push(t);
        self
    }
}

fn conventions() -> Value {
    json!({
        "laplacian": "one quarter of the standard Laplacian",
        "area_measure": "dA = d^2z / pi",
        "planar_vectors": "complex numbers x + iy",
        "complex_encoding": "[re, im]",
    })
}

/// The JSON envelope written for every command.
pub fn envelope(command: &str, cfg: &ExperimentConfig, hash: &str, body: Result<&Artifact, &CliError>) -> Value {
    let (status, result, error) = match body {
        Ok(a) => (if a.passed { "ok" } else { "check_failed" }, a.result.clone(), Value::Null),
        Err(e) => ("failed", Value::Null, Value::String(e.to_string())),
    };
    json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config_hash": hash,
        "seed": cfg.seed,
        "potential": cfg.potential,
        "conventions": conventions(),
        "status": status,
        "error": error,
        "result": result,
    })
}

/// Writes `report.json` and the CSV tables to `dir`, or prints the report
/// to stdout when `dir` is `None`.
pub fn write(dir: Option<&Path>, report: &Value, tables: &[Table]) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(report)? + "\n";
    let Some(dir) = dir else {
        print!("{text}");
        return Ok(());
    };
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io { path: dir.to_path_buf(), source: e })?;
    let path = dir.join("report.json");
    std::fs::write(&path, text).map_err(|e| CliError::Io { path: path.clone(), source: e })?;
    for t in tables {
        let path = dir.join(format!("{}.csv", t.name));
        let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::Csv { path: path.clone(), source: e })?;
        w.write_record(&t.header).map_err(|e| CliError::Csv { path: path.clone(), source: e })?;
        for r in &t.rows {
            w.write_record(r).map_err(|e| CliError::Csv { path: path.clone(), source: e })?;
        }
        w.flush().map_err(|e| CliError::Io { path: path.clone(), source: e })?;
    }
    Ok(())
}
