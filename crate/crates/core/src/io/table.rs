//! CSV output with a header row and 17-significant-digit numbers.

use std::path::Path;

use crate::error::{Error, Result};
use crate::matching::DescentTrace;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
}

impl Cell {
    fn render(&self) -> String {
        match *self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(v) if v.is_nan() => "NaN".to_string(),
            Cell::Float(v) => format!("{v:.16e}"),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

pub fn format_csv(header: &[&str], rows: &[Vec<Cell>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e.to_string()));
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::LengthMismatch {
                expected: header.len(),
                found: row.len(),
            });
        }
        w.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is ASCII"))
}

pub fn save_csv(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<Cell>]) -> Result<()> {
    std::fs::write(path, format_csv(header, rows)?)?;
    Ok(())
}

pub const TRACE_HEADER: [&str; 7] = ["iteration", "E_total", "E_penalty", "E_var", "grad_inf", "step", "accepted"];

pub fn trace_rows(trace: &DescentTrace) -> Vec<Vec<Cell>> {
    trace
        .records
        .iter()
        .map(|r| {
            vec![
                Cell::from(r.iteration),
                r.energy.total.into(),
                r.energy.penalty().into(),
                r.energy.attachment.into(),
                r.grad_max.into(),
                r.step.into(),
                Cell::Int(r.accepted as i64),
            ]
        })
        .collect()
}
