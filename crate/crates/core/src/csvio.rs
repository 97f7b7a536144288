//! Minimal deterministic CSV emission.
//!
//! All numeric cells go through [`fmt_f64`] so repeated runs with the same
//! seed produce byte-identical files.

use crate::error::Result;
use std::fmt::Write as _;
use std::path::Path;

pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        // normalize -0.0
        "0".to_string()
    } else {
        format!("{x:.12e}")
    }
}

pub struct CsvWriter {
    buf: String,
    columns: usize,
}

impl CsvWriter {
    pub fn new(header: &[&str]) -> Self {
        let mut buf = String::new();
        buf.push_str(&header.join(","));
        buf.push('\n');
        Self {
            buf,
            columns: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        assert_eq!(cells.len(), self.columns, "row width mismatch");
        let _ = writeln!(self.buf, "{}", cells.join(","));
    }

    pub fn row_f64(&mut self, cells: &[f64]) {
        let cells: Vec<String> = cells.iter().map(|&x| fmt_f64(x)).collect();
        self.row(&cells);
    }

    pub fn finish(self) -> String {
        self.buf
    }

    pub fn write_to(self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, self.buf)?;
        Ok(())
    }
}

/// Parse a CSV file into a header plus rows of f64 cells.
pub fn read_numeric_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| crate::error::Error::Config("empty CSV".into()))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        let row = row.map_err(|_| {
            crate::error::Error::Config(format!("CSV row {}: non-numeric cell", i + 2))
        })?;
        if row.len() != header.len() {
            return Err(crate::error::Error::Config(format!(
                "CSV row {}: expected {} cells, got {}",
                i + 2,
                header.len(),
                row.len()
            )));
        }
        rows.push(row);
    }
    Ok((header, rows))
}
