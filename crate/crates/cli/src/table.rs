//! Column tables with `#` metadata lines, written as CSV or JSON.

use std::io::{BufRead, Write};

use serde::Serialize;
use thiserror::Error;

use crate::config::Format;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Table {
    /// Comment lines without the leading `# `, in order.
    pub meta: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Lowercase scientific notation with 17 significant digits.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            meta: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_columns(columns: Vec<String>) -> Self {
        Self {
            meta: Vec::new(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn note(&mut self, key: &str, value: impl std::fmt::Display) {
        self.meta.push(format!("{key}={value}"));
    }

    pub fn note_value(&mut self, key: &str, value: f64) {
        self.meta.push(format!("{key}={}", format_value(value)));
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Builds rows from equal-length columns.
    pub fn from_columns(names: &[&str], columns: &[&[f64]]) -> Self {
        let mut t = Self::new(names);
        let n = columns.first().map_or(0, |c| c.len());
        for i in 0..n {
            t.push(columns.iter().map(|c| c[i]).collect());
        }
        t
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Value of a `key=value` metadata line.
    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find_map(|m| m.split_once('=').filter(|(k, _)| *k == key).map(|(_, v)| v))
    }

    pub fn write(&self, format: Format, out: &mut dyn Write) -> Result<(), TableError> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Json => {
                serde_json::to_writer_pretty(&mut *out, self)?;
                out.write_all(b"\n")?;
                Ok(())
            }
        }
    }

    pub fn write_csv(&self, out: &mut dyn Write) -> Result<(), TableError> {
        for m in &self.meta {
            writeln!(out, "# {m}")?;
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format_value(*v)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    /// Reads the format produced by [`Table::write_csv`].
    pub fn parse_csv(input: &str) -> Result<Self, TableError> {
        let mut meta = Vec::new();
        let mut body_start = 0;
        for line in input.as_bytes().lines() {
            let line = line?;
            match line.strip_prefix("#") {
                Some(rest) => {
                    meta.push(rest.strip_prefix(' ').unwrap_or(&rest).to_string());
                    body_start += line.len() + 1;
                }
                None => break,
            }
        }
        let body = input.get(body_start..).unwrap_or("");
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
        let columns: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let line = meta.len() + i + 2;
            if rec.len() != columns.len() {
                return Err(TableError::Parse {
                    line,
                    reason: format!("{} fields, expected {}", rec.len(), columns.len()),
                });
            }
            let row = rec
                .iter()
                .map(|f| {
                    f.parse::<f64>().map_err(|e| TableError::Parse {
                        line,
                        reason: format!("`{f}`: {e}"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Ok(Self { meta, columns, rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_format() {
        assert_eq!(format_value(1.25), "1.2500000000000000e0");
        assert_eq!(format_value(1.92464), "1.9246399999999999e0");
        assert_eq!(format_value(-0.375), "-3.7500000000000000e-1");
        assert_eq!(format_value(f64::NAN), "nan");
        let v = 0.1f64 + 0.2;
        assert_eq!(format_value(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn csv_round_trip() {
        let mut t = Table::new(&["x", "y"]);
        t.note("command", "fluid");
        t.note_value("sup", 0.5);
        t.push(vec![0.001, 1.0 / 3.0]);
        t.push(vec![2.0, f64::INFINITY]);
        let s = t.to_csv_string();
        assert!(s.starts_with("# command=fluid\n# sup=5.0000000000000000e-1\nx,y\n"));
        let back = Table::parse_csv(&s).unwrap();
        assert_eq!(back.to_csv_string(), s);
        assert_eq!(back.meta_value("command"), Some("fluid"));
        assert_eq!(back.column("y").unwrap()[0], 1.0 / 3.0);
    }

    #[test]
    fn rejects_ragged_rows() {
        assert!(matches!(Table::parse_csv("x,y\n1,2\n3\n"), Err(TableError::Csv(_) | TableError::Parse { .. })));
        assert!(matches!(Table::parse_csv("x\nabc\n"), Err(TableError::Parse { line: 2, .. })));
    }
}
