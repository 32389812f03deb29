//! Tables and summaries, written as CSV or JSON.
//!
//! Floats are printed with 17 significant digits (`{:.16e}`), which round-trips
//! every double. Missing values are empty CSV fields and JSON `null`.

use std::io::Write;
use std::path::Path;

use serde_json::{Map, Number, Value};

use crate::config::Format;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
    Missing,
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Float)
    }
}

impl From<Option<u64>> for Cell {
    fn from(v: Option<u64>) -> Self {
        v.map_or(Cell::Missing, Cell::Int)
    }
}

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// JSON number with 17 significant digits, or `null` if not finite.
pub fn json_float(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    serde_json::from_str::<Number>(&format_float(x)).map_or(Value::Null, Value::Number)
}

/// Rewrites every non-integer number in `v` with 17 significant digits.
pub fn normalize_floats(v: &mut Value) {
    match v {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => {
            *v = n.as_f64().map_or(Value::Null, json_float);
        }
        Value::Array(items) => items.iter_mut().for_each(normalize_floats),
        Value::Object(map) => map.values_mut().for_each(normalize_floats),
        _ => {}
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(x) => format_float(*x),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::from(*v),
            Cell::Float(x) => json_float(*x),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Missing => Value::Null,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn json_rows(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let map: Map<String, Value> = self
                        .header
                        .iter()
                        .zip(row)
                        .map(|(h, c)| (h.to_string(), c.json()))
                        .collect();
                    Value::Object(map)
                })
                .collect(),
        )
    }
}

/// What a command produces: a per-row table and an optional summary object.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub table: Table,
    pub summary: Option<Value>,
}

impl Output {
    pub fn table(table: Table) -> Self {
        Self { table, summary: None }
    }

    /// CSV: the table, then the summary as one JSON line. JSON: one object
    /// with `rows` and `summary`.
    pub fn render(&self, format: Format) -> CliResult<Vec<u8>> {
        let mut buf = Vec::new();
        match format {
            Format::Csv => {
                {
                    let mut w = csv::Writer::from_writer(&mut buf);
                    w.write_record(&self.table.header)?;
                    for row in &self.table.rows {
                        w.write_record(row.iter().map(Cell::csv))?;
                    }
                    w.flush()?;
                }
                if let Some(s) = &self.summary {
                    serde_json::to_writer(&mut buf, s).map_err(|e| CliError::Io(e.to_string()))?;
                    buf.push(b'\n');
                }
            }
            Format::Json => {
                let mut map = Map::new();
                map.insert("rows".into(), self.table.json_rows());
                if let Some(s) = &self.summary {
                    map.insert("summary".into(), s.clone());
                }
                serde_json::to_writer_pretty(&mut buf, &Value::Object(map))
                    .map_err(|e| CliError::Io(e.to_string()))?;
                buf.push(b'\n');
            }
        }
        Ok(buf)
    }

    /// Writes to `out`, or standard output.
    pub fn emit(&self, format: Format, out: Option<&Path>) -> CliResult<()> {
        let bytes = self.render(format)?;
        match out {
            Some(path) => std::fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
            None => {
                let stdout = std::io::stdout();
                let mut lock = stdout.lock();
                lock.write_all(&bytes)?;
                lock.flush()?;
                Ok(())
            }
        }
    }
}
