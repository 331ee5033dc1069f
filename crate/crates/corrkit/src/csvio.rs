//! CSV output shared by every subcommand.
//!
//! Files start with `#` comment lines carrying the resolved run
//! configuration, then one header line, then rows. Floats are written with
//! 17 significant digits so reading them back is bit-exact.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => format_f64(*v),
            Cell::Int(v) => v.to_string(),
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
        Cell::Int(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

/// 17 significant digits in scientific notation.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes comments, the header, and rows. Rows must match the header width.
pub fn emit_csv<W: Write>(
    mut out: W,
    comments: &[String],
    header: &[&str],
    rows: &[Vec<Cell>],
) -> Result<()> {
    for c in comments {
        for line in c.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(header)?;
    for (i, row) in rows.iter().enumerate() {
        if row.len() != header.len() {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("row has {} cells, header has {}", row.len(), header.len()),
            });
        }
        w.write_record(row.iter().map(Cell::render))?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv_file(
    path: &Path,
    comments: &[String],
    header: &[&str],
    rows: &[Vec<Cell>],
) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    emit_csv(file, comments, header, rows)
}

/// Parsed CSV: header names and raw string records, comments dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvData {
    pub header: Vec<String>,
    pub records: Vec<Vec<String>>,
}

impl CsvData {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Parses every cell of column `idx` as `f64`.
    pub fn numeric_column(&self, idx: usize) -> Result<Vec<f64>> {
        self.records
            .iter()
            .enumerate()
            .map(|(i, rec)| {
                let cell = rec.get(idx).ok_or_else(|| Error::Parse {
                    line: i + 2,
                    message: format!("missing column {idx}"),
                })?;
                cell.trim().parse().map_err(|_| Error::Parse {
                    line: i + 2,
                    message: format!("`{cell}` is not a number"),
                })
            })
            .collect()
    }
}

pub fn read_csv<R: Read>(input: R) -> Result<CsvData> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = rdr.headers()?.iter().map(str::to_owned).collect();
    let records = rdr
        .records()
        .map(|r| r.map(|rec| rec.iter().map(str::to_owned).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
    Ok(CsvData { header, records })
}

pub fn read_csv_file(path: &Path) -> Result<CsvData> {
    read_csv(File::open(path)?)
}

/// Everything after the comment lines; used to compare runs byte for byte.
pub fn body_of(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}
