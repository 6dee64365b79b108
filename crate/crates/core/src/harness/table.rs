use std::fs::{self, File};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    /// Floats are written with 12 significant digits.
    pub fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) if x.is_nan() => "NaN".to_string(),
            Cell::Float(x) if x.is_infinite() => if *x > 0.0 { "inf" } else { "-inf" }.to_string(),
            Cell::Float(x) => format!("{x:.11e}"),
            Cell::Text(s) => s.clone(),
        }
    }

    fn parse(field: &str) -> Cell {
        if let Ok(i) = field.parse::<i64>() {
            return Cell::Int(i);
        }
        match field.parse::<f64>() {
            Ok(x) => Cell::Float(x),
            Err(_) => Cell::Text(field.to_string()),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(i) => Some(*i as f64),
            Cell::Float(x) => Some(*x),
            Cell::Text(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

/// Provenance written next to every CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub experiment: String,
    pub config_sha256: String,
    pub seed: u64,
    pub trials: usize,
    pub version: String,
}

impl ResultTable {
    pub fn new(columns: Vec<String>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn get<'a>(&self, row: &'a [Cell], name: &str) -> Option<&'a Cell> {
        self.column(name).map(|i| &row[i])
    }

    pub fn get_float(&self, row: &[Cell], name: &str) -> Option<f64> {
        self.get(row, name).and_then(Cell::as_f64)
    }

    /// Rows whose `scheme` column equals `scheme`.
    pub fn scheme_rows<'a>(&'a self, scheme: &'a str) -> impl Iterator<Item = &'a Vec<Cell>> + 'a {
        let col = self.column("scheme");
        self.rows
            .iter()
            .filter(move |r| col.and_then(|c| r[c].as_str()) == Some(scheme))
    }

    pub fn max_failures(&self) -> usize {
        match self.column("failures") {
            Some(c) => self.rows.iter().filter_map(|r| r[c].as_f64()).fold(0.0, f64::max) as usize,
            None => 0,
        }
    }

    pub fn to_writer<W: std::io::Write>(&self, w: W) -> std::result::Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.columns)?;
        for row in &self.rows {
            out.write_record(row.iter().map(Cell::render))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn from_reader<R: std::io::Read>(r: R) -> std::result::Result<Self, csv::Error> {
        let mut rdr = csv::Reader::from_reader(r);
        let columns = rdr.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            rows.push(rec?.iter().map(Cell::parse).collect());
        }
        Ok(Self { columns, rows })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|source| io_err(path, source))?;
        self.to_writer(file).map_err(|e| csv_err(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|source| io_err(path, source))?;
        Self::from_reader(file).map_err(|e| csv_err(path, e))
    }
}

/// Path of the metadata file that accompanies `csv_path`.
pub fn metadata_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

/// Writes the CSV and its metadata sidecar.
pub fn emit_csv(table: &ResultTable, path: &Path, meta: &RunMetadata) -> Result<()> {
    table.write_csv(path)?;
    let meta_path = metadata_path(path);
    let json = serde_json::to_string_pretty(meta).expect("metadata serializes");
    fs::write(&meta_path, json + "\n").map_err(|source| io_err(&meta_path, source))
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let source = match e.into_kind() {
        csv::ErrorKind::Io(io) => io,
        other => std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{other:?}")),
    };
    io_err(path, source)
}
