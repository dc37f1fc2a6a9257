//! Matrix and vector ingestion with located error messages.

use std::path::Path;

use condmeas_core::Matrix;
use serde_json::Value;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn infer(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(Self::Csv),
            "json" => Some(Self::Json),
            _ => None,
        }
    }
}

/// Raw bytes plus the parsed matrix.
pub struct Loaded {
    pub bytes: Vec<u8>,
    pub matrix: Matrix,
}

pub fn load_matrix(path: &Path, format: Option<Format>) -> Result<Loaded, CliError> {
    let shown = path.display();
    let format = format.or_else(|| Format::infer(path)).ok_or_else(|| {
        CliError::Input(format!(
            "--input {shown}: cannot infer the format from the extension; pass --format csv or --format json"
        ))
    })?;
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Input(format!("--input {shown}: {e}")))?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| CliError::Input(format!("{shown}: not valid UTF-8: {e}")))?;
    let rows = match format {
        Format::Csv => parse_csv(text),
        Format::Json => parse_json(text),
    }
    .map_err(|msg| CliError::Input(format!("{shown}:{msg}")))?;
    let matrix = Matrix::from_rows(&rows)
        .map_err(|e| CliError::Input(format!("{shown}: {e}")))?;
    Ok(Loaded { bytes, matrix })
}

fn parse_number(field: &str) -> Result<f64, String> {
    let t = field.trim();
    let v: f64 = t
        .parse()
        .map_err(|_| format!("expected a decimal number, found {t:?}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("non-finite value {t:?} is not allowed"))
    }
}

/// Rows of a headerless comma-separated file. Errors are prefixed with
/// `line:column:` (1-based).
pub fn parse_csv(text: &str) -> Result<Vec<Vec<f64>>, String> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width_line = 0;
    for (ln, line) in text.lines().enumerate() {
        let line_no = ln + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        let mut col = 1;
        for field in line.split(',') {
            row.push(parse_number(field).map_err(|e| format!("{line_no}:{col}: {e}"))?);
            col += field.chars().count() + 1;
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(format!(
                    "{line_no}:1: ragged row with {} entries; line {width_line} has {}",
                    row.len(),
                    first.len()
                ));
            }
        } else {
            width_line = line_no;
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err("1:1: empty input".into());
    }
    Ok(rows)
}

/// Rows of a JSON document `{"rows": [[...], ...]}`.
pub fn parse_json(text: &str) -> Result<Vec<Vec<f64>>, String> {
    let doc: Value =
        serde_json::from_str(text).map_err(|e| format!("{}:{}: {e}", e.line(), e.column()))?;
    let rows = doc
        .get("rows")
        .ok_or("1:1: expected an object with key \"rows\"")?
        .as_array()
        .ok_or("1:1: \"rows\" must be an array of arrays")?;
    if rows.is_empty() {
        return Err("1:1: empty input".into());
    }
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let entries = row
            .as_array()
            .ok_or_else(|| format!("1:1: rows[{i}] is not an array"))?;
        let parsed = entries
            .iter()
            .enumerate()
            .map(|(j, x)| {
                x.as_f64()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| format!("1:1: rows[{i}][{j}] is not a finite number"))
            })
            .collect::<Result<Vec<f64>, String>>()?;
        if let Some(first) = out.first() {
            if parsed.len() != first.len() {
                return Err(format!(
                    "1:1: ragged row rows[{i}] with {} entries; rows[0] has {}",
                    parsed.len(),
                    first.len()
                ));
            }
        }
        out.push(parsed);
    }
    Ok(out)
}

/// Comma-separated vector given on the command line.
pub fn parse_vector(flag: &str, text: &str, len: usize) -> Result<Vec<f64>, CliError> {
    let v = text
        .split(',')
        .enumerate()
        .map(|(i, f)| parse_number(f).map_err(|e| format!("entry {}: {e}", i + 1)))
        .collect::<Result<Vec<f64>, String>>()
        .map_err(|e| CliError::Input(format!("{flag}: {e}")))?;
    if v.len() != len {
        return Err(CliError::Input(format!(
            "{flag}: expected {len} entries, found {}",
            v.len()
        )));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_examples() {
        assert_eq!(
            parse_csv("1,0\n0,1\n1,1\n").unwrap(),
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]
        );
        assert_eq!(parse_csv(" 1.5e0 , -2\r\n\n3,4").unwrap().len(), 2);
        let e = parse_csv("1,0\n0\n").unwrap_err();
        assert!(e.starts_with("2:1: ragged"), "{e}");
        let e = parse_csv("1,0\n0,abc\n").unwrap_err();
        assert!(e.starts_with("2:3:"), "{e}");
        assert!(parse_csv("1,NaN\n").unwrap_err().contains("non-finite"));
        assert!(parse_csv("inf\n").unwrap_err().contains("non-finite"));
        assert!(parse_csv("\n  \n").unwrap_err().contains("empty"));
    }

    #[test]
    fn json_examples() {
        assert_eq!(
            parse_json(r#"{"rows": [[1],[-1]]}"#).unwrap(),
            vec![vec![1.0], vec![-1.0]]
        );
        assert!(parse_json(r#"{"rows": [[1,2],[3]]}"#).unwrap_err().contains("ragged"));
        assert!(parse_json(r#"{"rows": []}"#).unwrap_err().contains("empty"));
        assert!(parse_json(r#"{"cols": []}"#).unwrap_err().contains("rows"));
        assert!(parse_json(r#"{"rows": [["a"]]}"#).unwrap_err().contains("rows[0][0]"));
        let e = parse_json("{\n  \"rows\": [[1,]]\n}").unwrap_err();
        assert!(e.starts_with("2:"), "{e}");
    }

    #[test]
    fn vectors() {
        assert_eq!(parse_vector("--rhs", "1, 2,3", 3).unwrap(), vec![1.0, 2.0, 3.0]);
        let e = parse_vector("--rhs", "1,2", 3).unwrap_err().to_string();
        assert!(e.contains("--rhs") && e.contains("expected 3"));
        let e = parse_vector("--point", "1,x", 2).unwrap_err().to_string();
        assert!(e.contains("--point") && e.contains("entry 2"));
    }
}
