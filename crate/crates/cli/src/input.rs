//! Score and assignment files.
//!
//! Scores are either a JSON array of numbers or CSV with one number per line
//! (an optional non-numeric header line is skipped). Assignments use the same
//! layouts with entries `1`/`+1`/`A` and `-1`/`B`.

use std::fs;
use std::path::Path;

use crate::error::{CliError, CliResult};

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_column(text: &str) -> CliResult<Vec<String>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        match rec.len() {
            0 => {}
            1 if rec[0].is_empty() => {}
            1 => out.push(rec[0].to_string()),
            n => {
                return Err(CliError::usage(format!(
                    "expected one value per line, found {n} on line {}",
                    out.len() + 1
                )))
            }
        }
    }
    Ok(out)
}

pub fn parse_scores(text: &str) -> CliResult<Vec<f64>> {
    if text.trim_start().starts_with('[') {
        return Ok(serde_json::from_str(text)?);
    }
    let fields = csv_column(text)?;
    let mut values = Vec::with_capacity(fields.len());
    for (i, f) in fields.iter().enumerate() {
        match f.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(_) => return Err(CliError::usage(format!("score {f:?} is not finite"))),
            Err(_) if i == 0 => {}
            Err(_) => return Err(CliError::usage(format!("cannot parse score {f:?}"))),
        }
    }
    Ok(values)
}

pub fn read_scores(path: &Path) -> CliResult<Vec<f64>> {
    parse_scores(&read(path)?)
}

fn assignment(token: &str) -> Option<i8> {
    match token {
        "1" | "+1" | "A" | "a" => Some(1),
        "-1" | "B" | "b" => Some(-1),
        _ => None,
    }
}

pub fn parse_assignments(text: &str) -> CliResult<Vec<i8>> {
    let tokens: Vec<String> = if text.trim_start().starts_with('[') {
        let raw: Vec<serde_json::Value> = serde_json::from_str(text)?;
        raw.iter()
            .map(|v| {
                v.as_str()
                    .map(str::to_string)
                    .unwrap_or_else(|| v.to_string())
            })
            .collect()
    } else {
        csv_column(text)?
    };
    let mut out = Vec::with_capacity(tokens.len());
    for (i, t) in tokens.iter().enumerate() {
        match assignment(t) {
            Some(a) => out.push(a),
            None if i == 0 => {}
            None => {
                return Err(CliError::usage(format!(
                    "assignment {t:?} is not one of 1, -1, A, B"
                )))
            }
        }
    }
    Ok(out)
}

pub fn read_assignments(path: &Path) -> CliResult<Vec<i8>> {
    parse_assignments(&read(path)?)
}
