//! Output documents: manifest + report, canonical JSON, CSV tables.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Number, Value};

use crate::CliError;

pub const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments after the program name.
    pub argv: Vec<String>,
    pub spec: Option<String>,
    /// Fully resolved configuration.
    pub overrides: BTreeMap<String, Value>,
    pub seed: Option<u64>,
    pub outputs: Vec<String>,
    pub tool_version: String,
    pub started_unix_ms: u64,
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub manifest: RunManifest,
    pub report: Value,
}

/// `x` rounded to 12 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Rounds every float; object keys come out sorted.
pub fn canonical(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().expect("f64"));
            Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(canonical).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, canonical(v))).collect::<Map<_, _>>()),
        other => other,
    }
}

pub fn to_canonical<T: Serialize>(x: &T) -> Value {
    canonical(serde_json::to_value(x).expect("report serialises"))
}

pub fn render(doc: &Document) -> String {
    let mut s = serde_json::to_string_pretty(&to_canonical(doc)).expect("document serialises");
    s.push('\n');
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Write { path: path.display().to_string(), source })
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Read { path: path.display().to_string(), source })
}

/// Header plus rows, written through `csv`.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let err = |e: csv::Error| CliError::Write { path: path.display().to_string(), source: e.into() };
        let mut w = csv::Writer::from_path(path).map_err(err)?;
        w.write_record(&self.header).map_err(err)?;
        for r in &self.rows {
            w.write_record(r).map_err(err)?;
        }
        w.flush().map_err(|source| CliError::Write { path: path.display().to_string(), source })
    }
}

pub fn num(x: f64) -> String {
    round_sig(x).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(round_sig(0.41229504371601), 0.412295043716);
        assert_eq!(round_sig(1.0), 1.0);
        assert_eq!(round_sig(-2.5e-17), -2.5e-17);
        assert_eq!(round_sig(round_sig(std::f64::consts::PI)), round_sig(std::f64::consts::PI));
    }

    #[test]
    fn canonical_sorts_and_rounds() {
        let v = serde_json::json!({"b": 1.0000000000004, "a": [2, 0.1234567890123456], "c": null});
        let s = serde_json::to_string(&canonical(v)).unwrap();
        assert_eq!(s, r#"{"a":[2,0.123456789012],"b":1.0,"c":null}"#);
    }
}
