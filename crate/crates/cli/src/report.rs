//! Tabular reports: a fixed-width table for people, CSV for machines.

use std::io::Write;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
}

impl Cell {
    fn table(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => sig7(*v),
            Cell::Text(s) => s.clone(),
        }
    }

    /// Shortest representation that parses back to the same value.
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// Rows of per-item values plus run-level summary values. In CSV the
/// summary values are appended as columns to every row.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub summary: Vec<(String, Cell)>,
}

impl Report {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            ..Self::default()
        }
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    pub fn summary(&mut self, name: &str, value: impl Into<Cell>) {
        self.summary.push((name.to_string(), value.into()));
    }

    pub fn write_table<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        if !self.columns.is_empty() && !self.rows.is_empty() {
            let cells: Vec<Vec<String>> = self.rows.iter().map(|r| r.iter().map(Cell::table).collect()).collect();
            let widths: Vec<usize> = self
                .columns
                .iter()
                .enumerate()
                .map(|(j, h)| cells.iter().map(|r| r[j].len()).chain([h.len()]).max().unwrap_or(0))
                .collect();
            let line = |items: &[String]| {
                items
                    .iter()
                    .zip(&widths)
                    .map(|(s, w)| format!("{s:>w$}"))
                    .collect::<Vec<_>>()
                    .join("  ")
            };
            writeln!(out, "{}", line(&self.columns))?;
            for r in &cells {
                writeln!(out, "{}", line(r))?;
            }
        }
        let width = self.summary.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in &self.summary {
            writeln!(out, "{k:<width$}  {}", v.table())?;
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let header: Vec<&str> = self
            .columns
            .iter()
            .map(String::as_str)
            .chain(self.summary.iter().map(|(k, _)| k.as_str()))
            .collect();
        w.write_record(&header)?;
        let tail: Vec<String> = self.summary.iter().map(|(_, v)| v.csv()).collect();
        if self.rows.is_empty() {
            w.write_record(&tail)?;
        }
        for r in &self.rows {
            let record: Vec<String> = r.iter().map(Cell::csv).chain(tail.iter().cloned()).collect();
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Seven significant digits without trailing zeros.
pub fn sig7(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (6 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}
