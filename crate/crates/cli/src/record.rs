//! Command output: one flat record per invocation, written as CSV or JSON.
//!
//! JSON layout:
//!
//! ```json
//! {"command": "pmf", "mode": "rational",
//!  "inputs": {"n": "2", "p": "2/3"},
//!  "values": {"k=-2": 0.1666, "k=0": 0.6666, "k=2": 0.1666},
//!  "exact": {"k=-2": "1/6", "k=0": "2/3", "k=2": "1/6"}}
//! ```
//!
//! A row label joins its key columns as `name=value` pairs separated by `;`.
//! `rounded` and `exact` maps appear only when some row carries them.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Mode {
    #[default]
    Float,
    Rational,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Float => "float",
            Mode::Rational => "rational",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A value cell. Integers stay integers, and sentinels such as `>500` are text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            // Debug gives the shortest round-trip form and switches to
            // exponent notation for very small or large magnitudes.
            Cell::Num(v) => write!(f, "{v:?}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub key: Vec<(String, String)>,
    pub value: Cell,
    pub rounded: Option<String>,
    pub exact: Option<String>,
}

impl Row {
    pub fn new<K: ToString, V: ToString>(key: &[(K, V)], value: impl Into<Cell>) -> Self {
        Self {
            key: key
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            value: value.into(),
            rounded: None,
            exact: None,
        }
    }

    pub fn with_rounded(mut self, rounded: impl Into<String>) -> Self {
        self.rounded = Some(rounded.into());
        self
    }

    pub fn with_exact(mut self, exact: Option<String>) -> Self {
        self.exact = exact;
        self
    }

    pub fn label(&self) -> String {
        self.key
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";")
    }

    fn parse_label(label: &str) -> CliResult<Vec<(String, String)>> {
        label
            .split(';')
            .map(|part| {
                part.split_once('=')
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .ok_or_else(|| CliError::usage(format!("malformed row label {label:?}")))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputRecord {
    pub command: String,
    pub mode: Mode,
    pub inputs: Vec<(String, String)>,
    pub rows: Vec<Row>,
}

impl OutputRecord {
    pub fn new(command: &str, mode: Mode) -> Self {
        Self {
            command: command.into(),
            mode,
            inputs: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn input(mut self, name: &str, value: impl ToString) -> Self {
        self.inputs.push((name.into(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Row) {
        self.rows.push(row);
    }

    /// Looks up the value of the row with exactly these key values.
    pub fn get(&self, key: &[&str]) -> Option<&Row> {
        self.rows
            .iter()
            .find(|r| r.key.len() == key.len() && r.key.iter().zip(key).all(|((_, v), k)| v == k))
    }

    fn has_rounded(&self) -> bool {
        self.rows.iter().any(|r| r.rounded.is_some())
    }

    fn has_exact(&self) -> bool {
        self.rows.iter().any(|r| r.exact.is_some())
    }

    pub fn columns(&self) -> Vec<String> {
        let mut cols: Vec<String> = self
            .rows
            .first()
            .map(|r| r.key.iter().map(|(k, _)| k.clone()).collect())
            .unwrap_or_default();
        cols.push("value".into());
        if self.has_rounded() {
            cols.push("rounded".into());
        }
        if self.has_exact() {
            cols.push("exact".into());
        }
        cols
    }

    pub fn write_csv<W: Write>(&self, out: W) -> CliResult<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.columns())?;
        let (rounded, exact) = (self.has_rounded(), self.has_exact());
        for row in &self.rows {
            let mut fields: Vec<String> = row.key.iter().map(|(_, v)| v.clone()).collect();
            fields.push(row.value.to_string());
            if rounded {
                fields.push(row.rounded.clone().unwrap_or_default());
            }
            if exact {
                fields.push(row.exact.clone().unwrap_or_default());
            }
            w.write_record(&fields)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> CliResult<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    /// Rows from CSV text written by [`OutputRecord::write_csv`]. Values are
    /// read back as integers, floats or text, in that order of preference.
    pub fn rows_from_csv(text: &str) -> CliResult<Vec<Row>> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let headers = r.headers()?.clone();
        let value_at = headers
            .iter()
            .position(|h| h == "value")
            .ok_or_else(|| CliError::usage("no value column"))?;
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let key = headers
                .iter()
                .zip(rec.iter())
                .take(value_at)
                .map(|(h, v)| (h.to_string(), v.to_string()))
                .collect();
            let mut row = Row {
                key,
                value: parse_cell(&rec[value_at]),
                rounded: None,
                exact: None,
            };
            for (h, v) in headers.iter().zip(rec.iter()).skip(value_at + 1) {
                let v = (!v.is_empty()).then(|| v.to_string());
                match h {
                    "rounded" => row.rounded = v,
                    "exact" => row.exact = v,
                    _ => {}
                }
            }
            rows.push(row);
        }
        Ok(rows)
    }

    pub fn to_json_value(&self) -> Value {
        let mut top = Map::new();
        top.insert("command".into(), Value::String(self.command.clone()));
        top.insert("mode".into(), Value::String(self.mode.as_str().into()));
        let inputs = self
            .inputs
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect();
        top.insert("inputs".into(), Value::Object(inputs));
        let values = self
            .rows
            .iter()
            .map(|r| {
                (
                    r.label(),
                    serde_json::to_value(&r.value).expect("cells serialize"),
                )
            })
            .collect();
        top.insert("values".into(), Value::Object(values));
        if self.has_rounded() {
            let rounded = self
                .rows
                .iter()
                .filter_map(|r| {
                    r.rounded
                        .as_ref()
                        .map(|s| (r.label(), Value::String(s.clone())))
                })
                .collect();
            top.insert("rounded".into(), Value::Object(rounded));
        }
        if self.has_exact() {
            let exact = self
                .rows
                .iter()
                .filter_map(|r| {
                    r.exact
                        .as_ref()
                        .map(|s| (r.label(), Value::String(s.clone())))
                })
                .collect();
            top.insert("exact".into(), Value::Object(exact));
        }
        Value::Object(top)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("json values serialize")
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        let value: Value = serde_json::from_str(text)?;
        let top = value
            .as_object()
            .ok_or_else(|| CliError::usage("record must be a JSON object"))?;
        let text_field = |name: &str| -> CliResult<String> {
            top.get(name)
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| CliError::usage(format!("record field {name:?} missing")))
        };
        let object_field = |name: &str| top.get(name).and_then(Value::as_object);
        let mode = match text_field("mode")?.as_str() {
            "float" => Mode::Float,
            "rational" => Mode::Rational,
            other => return Err(CliError::usage(format!("unknown mode {other:?}"))),
        };
        let inputs = object_field("inputs")
            .map(|m| {
                m.iter()
                    .map(|(k, v)| (k.clone(), v.as_str().unwrap_or_default().to_string()))
                    .collect()
            })
            .unwrap_or_default();
        let lookup = |name: &str, label: &str| {
            object_field(name)
                .and_then(|m| m.get(label))
                .and_then(Value::as_str)
                .map(str::to_string)
        };
        let mut rows = Vec::new();
        for (label, v) in object_field("values").into_iter().flatten() {
            rows.push(Row {
                key: Row::parse_label(label)?,
                value: serde_json::from_value(v.clone())?,
                rounded: lookup("rounded", label),
                exact: lookup("exact", label),
            });
        }
        Ok(Self {
            command: text_field("command")?,
            mode,
            inputs,
            rows,
        })
    }

    pub fn write<W: Write>(&self, format: Format, mut out: W) -> CliResult<()> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Json => {
                writeln!(out, "{}", self.to_json())?;
                Ok(())
            }
        }
    }
}

fn parse_cell(s: &str) -> Cell {
    if let Ok(i) = s.parse::<i64>() {
        Cell::Int(i)
    } else if let Ok(x) = s.parse::<f64>() {
        Cell::Num(x)
    } else {
        Cell::Text(s.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> OutputRecord {
        let mut r = OutputRecord::new("table1", Mode::Float).input("n-max", 500);
        r.push(Row::new(&[("k", "0"), ("p", "3/5"), ("tol", "0.1")], 20i64));
        r.push(Row::new(
            &[("k", "50"), ("p", "3/5"), ("tol", "0.001")],
            Cell::Text(">500".into()),
        ));
        r.push(
            Row::new(&[("k", "1"), ("p", "7/10"), ("tol", "0.05")], 1.0e-7).with_rounded("0.00"),
        );
        r
    }

    #[test]
    fn csv_layout() {
        let csv = sample().to_csv().unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "k,p,tol,value,rounded");
        assert_eq!(lines[1], "0,3/5,0.1,20,");
        assert_eq!(lines[2], "50,3/5,0.001,>500,");
        assert_eq!(lines[3], "1,7/10,0.05,1e-7,0.00");
    }

    #[test]
    fn csv_rows_round_trip() {
        let r = sample();
        assert_eq!(
            OutputRecord::rows_from_csv(&r.to_csv().unwrap()).unwrap(),
            r.rows
        );
    }

    #[test]
    fn json_is_flat() {
        let v = sample().to_json_value();
        for (_, field) in v.as_object().unwrap() {
            if let Some(obj) = field.as_object() {
                assert!(obj.values().all(|x| !x.is_object() && !x.is_array()));
            }
        }
        assert_eq!(v["values"]["k=50;p=3/5;tol=0.001"], ">500");
        assert_eq!(v["values"]["k=0;p=3/5;tol=0.1"], 20);
    }

    #[test]
    fn json_round_trip_sample() {
        let r = sample();
        assert_eq!(OutputRecord::from_json(&r.to_json()).unwrap(), r);
    }

    fn cell() -> impl Strategy<Value = Cell> {
        prop_oneof![
            any::<i64>().prop_map(Cell::Int),
            any::<f64>()
                .prop_filter("finite", |x| x.is_finite())
                .prop_map(Cell::Num),
            "[a-z>]{1,6}".prop_map(Cell::Text),
        ]
    }

    fn row() -> impl Strategy<Value = Row> {
        (
            proptest::collection::vec(("[a-z]{1,4}", "[0-9a-z/.,()-]{1,6}"), 1..4),
            cell(),
            proptest::option::of("[0-9.]{1,6}"),
            proptest::option::of("-?[0-9]{1,5}/[1-9][0-9]{0,4}"),
        )
            .prop_map(|(key, value, rounded, exact)| Row {
                key,
                value,
                rounded,
                exact,
            })
    }

    proptest! {
        #[test]
        fn json_round_trip(
            command in "[a-z0-9-]{1,12}",
            rational in any::<bool>(),
            inputs in proptest::collection::vec(("[a-z-]{1,6}", "[ -~]{0,8}"), 0..4),
            rows in proptest::collection::vec(row(), 0..6),
        ) {
            // labels are map keys and must be unique
            let mut seen = std::collections::HashSet::new();
            let rows: Vec<Row> = rows.into_iter().filter(|r| seen.insert(r.label())).collect();
            let mut seen = std::collections::HashSet::new();
            let inputs = inputs.into_iter().filter(|(k, _)| seen.insert(k.clone())).collect();
            let mode = if rational { Mode::Rational } else { Mode::Float };
            let r = OutputRecord { command, mode, inputs, rows };
            prop_assert_eq!(OutputRecord::from_json(&r.to_json()).unwrap(), r);
        }
    }
}
