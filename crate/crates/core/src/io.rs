//! Dataset ingestion (CSV, whitespace-delimited, TSPLIB `NODE_COORD_SECTION`),
//! CSV output, min-max normalization and the dataset registry.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Centroids, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Whitespace,
    Tsplib,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "whitespace" | "ws" | "txt" => Ok(Format::Whitespace),
            "tsplib" | "tsp" => Ok(Format::Tsplib),
            other => Err(Error::config(format!("unknown dataset format '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub path: PathBuf,
    pub format: Format,
    #[serde(default)]
    pub has_header: bool,
    #[serde(default)]
    pub normalize: bool,
    /// Zero-based columns to keep, in this order. `None` keeps all.
    #[serde(default)]
    pub columns: Option<Vec<usize>>,
}

impl DatasetSpec {
    pub fn new(path: impl Into<PathBuf>, format: Format) -> Self {
        Self {
            path: path.into(),
            format,
            has_header: false,
            normalize: false,
            columns: None,
        }
    }
}

pub fn load(spec: &DatasetSpec) -> Result<Dataset> {
    let file = File::open(&spec.path).map_err(|source| Error::Io {
        path: spec.path.clone(),
        source,
    })?;
    load_from_reader(spec, file)
}

/// Parses `reader` as if it were the file named in `spec`.
pub fn load_from_reader<R: Read>(spec: &DatasetSpec, reader: R) -> Result<Dataset> {
    let parsed = match spec.format {
        Format::Csv => parse_csv(&spec.path, reader, spec.has_header)?,
        Format::Whitespace => parse_whitespace(&spec.path, reader, spec.has_header)?,
        Format::Tsplib => parse_tsplib(&spec.path, reader)?,
    };
    let mut data = match &spec.columns {
        Some(cols) => select_columns(&spec.path, &parsed, cols)?,
        None => parsed,
    };
    if spec.normalize {
        data = min_max_normalize(&data);
    }
    Ok(data)
}

struct Parsed {
    values: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Parsed {
    fn new() -> Self {
        Self {
            values: Vec::new(),
            rows: 0,
            cols: 0,
        }
    }

    fn push_row(&mut self, path: &Path, line: usize, row: &[f64]) -> Result<()> {
        if self.rows == 0 {
            self.cols = row.len();
        } else if row.len() != self.cols {
            return Err(parse_err(
                path,
                line,
                row.len().min(self.cols) + 1,
                format!("expected {} fields, found {}", self.cols, row.len()),
            ));
        }
        self.values.extend_from_slice(row);
        self.rows += 1;
        Ok(())
    }

    fn finish(self, path: &Path) -> Result<Dataset> {
        if self.rows == 0 {
            return Err(parse_err(path, 1, 1, "no data rows".into()));
        }
        Dataset::new(self.rows, self.cols, self.values)
    }
}

fn parse_err(path: &Path, line: usize, column: usize, message: String) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message,
    }
}

fn parse_cell(path: &Path, line: usize, column: usize, cell: &str) -> Result<f64> {
    let cell = cell.trim();
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(parse_err(path, line, column, format!("non-finite value '{cell}'"))),
        Err(_) if cell.is_empty() => Err(parse_err(path, line, column, "missing value".into())),
        Err(_) => Err(parse_err(path, line, column, format!("not a number: '{cell}'"))),
    }
}

fn parse_csv<R: Read>(path: &Path, reader: R, has_header: bool) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .from_reader(reader);
    let mut out = Parsed::new();
    let mut row = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        row.clear();
        for (c, cell) in record.iter().enumerate() {
            row.push(parse_cell(path, line, c + 1, cell)?);
        }
        out.push_row(path, line, &row)?;
    }
    out.finish(path)
}

fn parse_whitespace<R: Read>(path: &Path, reader: R, has_header: bool) -> Result<Dataset> {
    let mut out = Parsed::new();
    let mut row = Vec::new();
    let mut header_pending = has_header;
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        if header_pending {
            header_pending = false;
            continue;
        }
        row.clear();
        for (c, tok) in line.split_whitespace().enumerate() {
            row.push(parse_cell(path, i + 1, c + 1, tok)?);
        }
        out.push_row(path, i + 1, &row)?;
    }
    out.finish(path)
}

/// Reads `index x y [...]` records from a TSPLIB file. Records start after
/// `NODE_COORD_SECTION`, or at the first line that begins with a number when
/// the keyword is absent, and run to `EOF` or end of input. The index column
/// is dropped. A `DIMENSION` header, if present, must match the record count.
fn parse_tsplib<R: Read>(path: &Path, reader: R) -> Result<Dataset> {
    let mut out = Parsed::new();
    let mut row = Vec::new();
    let mut in_body = false;
    let mut dimension: Option<(usize, usize)> = None;
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed == "EOF" {
            break;
        }
        if !in_body {
            let first = trimmed.split_whitespace().next().unwrap_or("");
            if trimmed.starts_with("NODE_COORD_SECTION") {
                in_body = true;
                continue;
            }
            if first.parse::<f64>().is_err() {
                if let Some((key, value)) = trimmed.split_once(':') {
                    if key.trim() == "DIMENSION" {
                        let d = value.trim().parse::<usize>().map_err(|_| {
                            parse_err(path, lineno, 1, format!("bad DIMENSION '{}'", value.trim()))
                        })?;
                        dimension = Some((d, lineno));
                    }
                }
                continue;
            }
            in_body = true;
        }
        row.clear();
        let mut toks = trimmed.split_whitespace();
        let index = toks.next().expect("non-empty line");
        if index.parse::<u64>().is_err() {
            return Err(parse_err(path, lineno, 1, format!("bad node index '{index}'")));
        }
        for (c, tok) in toks.enumerate() {
            row.push(parse_cell(path, lineno, c + 2, tok)?);
        }
        if row.is_empty() {
            return Err(parse_err(path, lineno, 2, "node without coordinates".into()));
        }
        out.push_row(path, lineno, &row)?;
    }
    if let Some((d, lineno)) = dimension {
        if d != out.rows && out.rows > 0 {
            return Err(parse_err(
                path,
                lineno,
                1,
                format!("DIMENSION is {d} but {} nodes were read", out.rows),
            ));
        }
    }
    out.finish(path)
}

fn select_columns(path: &Path, data: &Dataset, cols: &[usize]) -> Result<Dataset> {
    if cols.is_empty() {
        return Err(Error::config("column selection is empty"));
    }
    if let Some(&bad) = cols.iter().find(|&&c| c >= data.dims()) {
        return Err(Error::config(format!(
            "{}: column {bad} does not exist ({} columns)",
            path.display(),
            data.dims()
        )));
    }
    let mut values = Vec::with_capacity(data.len() * cols.len());
    for row in data.rows() {
        values.extend(cols.iter().map(|&c| row[c]));
    }
    Dataset::new(data.len(), cols.len(), values)
}

/// Per column `(x − min) / (max − min)`; constant columns become 0.
pub fn min_max_normalize(data: &Dataset) -> Dataset {
    let n = data.dims();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for row in data.rows() {
        for (c, &v) in row.iter().enumerate() {
            lo[c] = lo[c].min(v);
            hi[c] = hi[c].max(v);
        }
    }
    let mut values = Vec::with_capacity(data.len() * n);
    for row in data.rows() {
        values.extend(row.iter().enumerate().map(|(c, &v)| {
            let range = hi[c] - lo[c];
            if range > 0.0 {
                ((v - lo[c]) / range).clamp(0.0, 1.0)
            } else {
                0.0
            }
        }));
    }
    Dataset::new(data.len(), n, values).expect("normalized values are finite")
}

/// Writes rows as comma-separated shortest round-trip decimals with `\n`
/// line endings, so [`load`] reproduces every value bit for bit.
pub fn write_csv<W: Write>(data: &Dataset, out: W) -> std::io::Result<()> {
    write_rows(data.rows(), out)
}

/// Centroid rows in index order; degenerate rows are written as empty lines.
pub fn write_centroids_csv<W: Write>(cent: &Centroids, mut out: W) -> std::io::Result<()> {
    for j in 0..cent.k() {
        if !cent.is_degenerate(j) {
            write_row(cent.row(j), &mut out)?;
        }
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn write_labels<W: Write>(labels: &[usize], mut out: W) -> std::io::Result<()> {
    for l in labels {
        writeln!(out, "{l}")?;
    }
    out.flush()
}

fn write_rows<'a, W: Write>(rows: impl Iterator<Item = &'a [f64]>, mut out: W) -> std::io::Result<()> {
    for row in rows {
        write_row(row, &mut out)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

fn write_row<W: Write>(row: &[f64], out: &mut W) -> std::io::Result<()> {
    for (c, v) in row.iter().enumerate() {
        if c > 0 {
            out.write_all(b",")?;
        }
        write!(out, "{v:?}")?;
    }
    Ok(())
}

/// Chunk size, time budget and repetitions used for one `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolEntry {
    pub n_exec: usize,
    pub chunk_size: usize,
    pub cpu_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub name: String,
    #[serde(default)]
    pub title: String,
    /// Relative to the data directory the registry is resolved against.
    pub path: PathBuf,
    pub format: Format,
    #[serde(default)]
    pub has_header: bool,
    #[serde(default)]
    pub normalize: bool,
    #[serde(default)]
    pub columns: Option<Vec<usize>>,
    /// Best known objective per `k` (keys are decimal `k`).
    #[serde(default)]
    pub f_best: BTreeMap<String, f64>,
    /// `k` values whose `f_best` was found only by the reference experiments
    /// rather than taken from earlier literature.
    #[serde(default)]
    pub f_best_local_only: Vec<usize>,
    #[serde(default)]
    pub protocol: BTreeMap<String, ProtocolEntry>,
}

impl RegistryEntry {
    pub fn f_best(&self, k: usize) -> Option<f64> {
        self.f_best.get(&k.to_string()).copied()
    }

    pub fn protocol(&self, k: usize) -> Option<ProtocolEntry> {
        self.protocol.get(&k.to_string()).copied()
    }

    pub fn spec(&self, data_dir: &Path) -> DatasetSpec {
        DatasetSpec {
            path: data_dir.join(&self.path),
            format: self.format,
            has_header: self.has_header,
            normalize: self.normalize,
            columns: self.columns.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Registry {
    pub datasets: Vec<RegistryEntry>,
}

const BUILTIN_REGISTRY: &str = include_str!("../registry.json");

impl Registry {
    /// The registry shipped with the crate: the 23 benchmark configurations
    /// with their best known objectives and reference protocol.
    pub fn builtin() -> Self {
        serde_json::from_str(BUILTIN_REGISTRY).expect("bundled registry is valid JSON")
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn get(&self, name: &str) -> Option<&RegistryEntry> {
        self.datasets.iter().find(|d| d.name == name)
    }
}
