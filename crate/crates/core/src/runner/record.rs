//! Result records and their CSV / JSON serialization.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::RunError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(u64),
    Num(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        self.rows
            .iter()
            .map(|r| match r[i] {
                Cell::Int(v) => Some(v as f64),
                Cell::Num(v) => Some(v),
                Cell::Text(_) => None,
            })
            .collect()
    }

    /// CSV with every float in `{:.16e}` (17 significant digits).
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                match cell {
                    Cell::Int(v) => write!(out, "{v}").expect("write to string"),
                    Cell::Num(v) => write!(out, "{v:.16e}").expect("write to string"),
                    Cell::Text(s) => out.push_str(s),
                }
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: Option<f64>,
    pub tolerance: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub experiment: String,
    pub module: String,
    pub version: String,
    /// Unix seconds; taken from `SOURCE_DATE_EPOCH` when set.
    pub timestamp: u64,
    pub seed: u64,
    /// Every parameter the experiment read, defaults included.
    pub inputs: BTreeMap<String, Value>,
    pub tolerances: BTreeMap<String, f64>,
    pub scalars: BTreeMap<String, f64>,
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl ResultRecord {
    pub fn to_json(&self) -> Result<String, RunError> {
        let finite_checks = self.checks.iter().all(|c| c.measured.is_none_or(f64::is_finite));
        let finite_tables = self.tables.iter().all(|t| {
            t.rows.iter().flatten().all(|c| match c {
                Cell::Num(v) => v.is_finite(),
                Cell::Int(_) | Cell::Text(_) => true,
            })
        });
        let finite = self.scalars.values().all(|v| v.is_finite()) && finite_checks && finite_tables;
        if !finite {
            return Err(RunError::Internal(format!("{}: non-finite value in result record", self.experiment)));
        }
        let mut s = serde_json::to_string_pretty(self).map_err(|e| RunError::Internal(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, RunError> {
        serde_json::from_str(text).map_err(|e| RunError::Config(format!("result record: {e}")))
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Timestamp honouring `SOURCE_DATE_EPOCH` for reproducible builds of records.
pub fn timestamp() -> u64 {
    if let Some(v) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse().ok()) {
        return v;
    }
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_uses_seventeen_digits() {
        let mut t = Table::new("t", &["label", "x"]);
        t.push(vec!["a".into(), 0.1.into()]);
        assert_eq!(t.to_csv(), "label,x\na,1.0000000000000001e-1\n");
    }

    #[test]
    fn record_round_trips() {
        let mut t = Table::new("t", &["x"]);
        t.push(vec![(1.0f64 / 3.0).into()]);
        let rec = ResultRecord {
            experiment: "e".into(),
            module: "m".into(),
            version: "0".into(),
            timestamp: 5,
            seed: 1,
            inputs: [("a".to_string(), Value::from(0.1)), ("n".to_string(), Value::from(64u64))].into(),
            tolerances: [("tol".to_string(), 1e-10)].into(),
            scalars: [("pi".to_string(), std::f64::consts::PI)].into(),
            tables: vec![t],
            checks: vec![Check {
                name: "c".into(),
                passed: true,
                measured: Some(1e-300),
                tolerance: None,
                detail: String::new(),
            }],
            passed: true,
        };
        let back = ResultRecord::from_json(&rec.to_json().unwrap()).unwrap();
        assert_eq!(back, rec);
    }
}
