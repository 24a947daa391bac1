use std::fs;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::args::Format;
use crate::manifest::{ExperimentManifest, SCHEMA_VERSION};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub id: String,
    pub description: String,
    pub pass: bool,
    pub values: Map<String, Value>,
}

impl Check {
    pub fn new(id: &str, description: &str, pass: bool, values: Value) -> Self {
        let values = match values {
            Value::Object(m) => m,
            other => {
                let mut m = Map::new();
                m.insert("value".into(), other);
                m
            }
        };
        Self {
            id: id.into(),
            description: description.into(),
            pass,
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    pub manifest: ExperimentManifest,
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run: Option<Value>,
}

impl Report {
    pub fn new(command: &str, manifest: ExperimentManifest, checks: Vec<Check>, artifacts: Vec<String>) -> Self {
        let passed = checks.iter().all(|c| c.pass);
        Self {
            schema_version: SCHEMA_VERSION,
            tool: "filigeo".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            manifest,
            checks,
            artifacts,
            passed,
            run: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Writes artifacts into the output directory and remembers their names.
#[derive(Debug)]
pub struct Output {
    dir: PathBuf,
    format: Format,
    pub artifacts: Vec<String>,
}

impl Output {
    pub fn new(manifest: &ExperimentManifest) -> Result<Self, CliError> {
        let dir = manifest.out_dir().to_path_buf();
        fs::create_dir_all(&dir).map_err(|e| CliError::Io(dir.display().to_string(), e))?;
        Ok(Self {
            dir,
            format: manifest.format,
            artifacts: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(|e| CliError::Io(path.display().to_string(), e))?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    /// Tabular data given as CSV; written as `<stem>.csv` or, with
    /// `--format json`, as `<stem>.json` with `columns` and `rows`.
    pub fn table(&mut self, stem: &str, csv: &str) -> Result<(), CliError> {
        match self.format {
            Format::Csv => self.write(&format!("{stem}.csv"), csv),
            Format::Json => {
                let v = csv_to_json(csv);
                self.json(stem, &v)
            }
        }
    }

    pub fn json(&mut self, stem: &str, v: &Value) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(v).expect("value serializes");
        s.push('\n');
        self.write(&format!("{stem}.json"), &s)
    }

    /// Raw text with a fixed file name, independent of `--format`.
    pub fn raw(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        self.write(name, text)
    }

    pub fn report(&mut self, report: &Report) -> Result<(), CliError> {
        self.write("report.json", &report.to_json())
    }
}

/// Unquoted CSV to `{columns, rows}`; numeric cells become numbers.
pub fn csv_to_json(csv: &str) -> Value {
    let mut lines = csv.lines();
    let columns: Vec<&str> = lines.next().map(|h| h.split(',').collect()).unwrap_or_default();
    let rows: Vec<Value> = lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            Value::Array(
                l.split(',')
                    .map(|c| match c.parse::<f64>() {
                        Ok(v) if v.is_finite() => json!(v),
                        _ => json!(c),
                    })
                    .collect(),
            )
        })
        .collect();
    json!({ "columns": columns, "rows": rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_conversion() {
        let v = csv_to_json("t,x1,side\n0e0,1.5e0,minus\n1e0,2e0,plus\n");
        assert_eq!(v["columns"], json!(["t", "x1", "side"]));
        assert_eq!(v["rows"][1], json!([1.0, 2.0, "plus"]));
    }

    #[test]
    fn passed_is_the_conjunction() {
        let m: ExperimentManifest = serde_json::from_value(json!({
            "schema_version": 1, "experiment": "hw", "metric": null,
            "params": {"lambda": null, "eps": null, "rtol": 1e-10, "atol": 1e-12,
                       "event_tol": 1e-10, "grid_h": null, "seed": 0},
            "out_dir": "x", "format": "csv"
        }))
        .unwrap();
        let ok = Check::new("A1", "", true, json!({}));
        let bad = Check::new("A2", "", false, json!(3));
        assert!(Report::new("experiment", m.clone(), vec![ok.clone()], vec![]).passed);
        let r = Report::new("experiment", m, vec![ok, bad], vec![]);
        assert!(!r.passed);
        assert_eq!(r.checks[1].values["value"], json!(3));
    }
}
