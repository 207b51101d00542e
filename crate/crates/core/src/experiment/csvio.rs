//! CSV schemas of the experiment outputs and a strict reader for them.

use std::fmt::Display;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const THRESHOLD_COLUMNS: &[&str] = &[
    "kind", "epsilon", "u_or_blank", "threshold", "M", "n_steps", "seed", "ci_lo", "ci_hi",
];
pub const POWER_COLUMNS: &[&str] = &["test", "epsilon", "u", "power", "stderr", "M"];
/// Finite-horizon curves append the empirical size of the same test.
pub const FINITE_POWER_COLUMNS: &[&str] = &["test", "epsilon", "u", "power", "stderr", "M", "size"];
pub const STATISTIC_COLUMNS: &[&str] = &[
    "path_id",
    "count",
    "delta",
    "j",
    "mle_u",
    "l_at_mle",
    "score_reject",
    "lr_reject",
    "wald_reject",
];
pub const COMPARE_COLUMNS: &[&str] = &["epsilon", "u", "upper", "lower", "gap", "stderr", "z", "violation"];

/// Writes one row; values are rendered with `Display` (shortest round-trip
/// form for floats), so identical inputs give identical bytes.
pub fn write_row<W: Write>(out: &mut W, fields: &[&dyn Display]) -> std::io::Result<()> {
    for (i, f) in fields.iter().enumerate() {
        if i > 0 {
            out.write_all(b",")?;
        }
        write!(out, "{f}")?;
    }
    out.write_all(b"\n")
}

pub fn write_header<W: Write>(out: &mut W, columns: &[&str]) -> std::io::Result<()> {
    writeln!(out, "{}", columns.join(","))
}

/// A parsed CSV with a validated header.
#[derive(Debug, Clone)]
pub struct CsvTable {
    source: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn parse(text: &str, source: &str, required: &[&str]) -> Result<Self> {
        let schema = |message: String| Error::Schema {
            source_name: source.to_string(),
            message,
        };
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| schema("file is empty".into()))?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        for col in required {
            if !header.iter().any(|h| h == col) {
                return Err(schema(format!("missing column {col:?}")));
            }
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let row: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
            if row.len() != header.len() {
                return Err(schema(format!(
                    "row {} has {} fields, header has {}",
                    i + 1,
                    row.len(),
                    header.len()
                )));
            }
            rows.push(row);
        }
        Ok(Self {
            source: source.to_string(),
            header,
            rows,
        })
    }

    pub fn read(path: &Path, required: &[&str]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string(), required)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.header.iter().position(|h| h == name).ok_or_else(|| Error::Schema {
            source_name: self.source.clone(),
            message: format!("missing column {name:?}"),
        })
    }

    pub fn text(&self, row: usize, name: &str) -> Result<&str> {
        Ok(&self.rows[row][self.column(name)?])
    }

    /// Numeric field; the error names the column and row.
    pub fn number(&self, row: usize, name: &str) -> Result<f64> {
        let raw = self.text(row, name)?;
        raw.parse::<f64>().map_err(|_| Error::Schema {
            source_name: self.source.clone(),
            message: format!("column {name:?}, row {}: {raw:?} is not a number", row + 1),
        })
    }

    pub fn optional_number(&self, row: usize, name: &str) -> Result<Option<f64>> {
        if self.text(row, name)?.is_empty() {
            Ok(None)
        } else {
            self.number(row, name).map(Some)
        }
    }
}
