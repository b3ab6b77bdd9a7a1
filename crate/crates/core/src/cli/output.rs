use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::Serialize;

use super::config::ExperimentConfig;

/// Seventeen significant digits, so every `f64` round-trips.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Bool(bool),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format_float(*v),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
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
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Float)
    }
}

/// Named columns with a `#`-prefixed provenance header.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    header: Vec<String>,
    columns: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

impl ResultTable {
    pub fn new(header: Vec<String>, columns: &[&'static str]) -> Self {
        Self { header, columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the column count");
        self.rows.push(row);
    }

    /// Marks an aborted run: `FAILED` in the first column, the reason as a comment.
    pub fn push_failure(&mut self, reason: &str) {
        self.header.push(format!("error: {reason}"));
        let mut row = vec![Cell::Text("FAILED".into())];
        row.resize(self.columns.len(), Cell::Empty);
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in &self.header {
            let _ = writeln!(out, "# {line}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.render())
    }
}

/// Header lines echoing everything a reader needs to reproduce the file.
pub fn provenance(cfg: &ExperimentConfig, command: &str, eps: &[f64]) -> Vec<String> {
    let mut lines = vec![
        format!("qzeno {}", env!("CARGO_PKG_VERSION")),
        format!("command: {command}"),
        format!("config_sha256: {}", cfg.sha256()),
        format!("hbar: {}", format_float(cfg.physical.hbar)),
        format!("mass: {}", format_float(cfg.physical.mass)),
        format!("region: [{}, {}]", format_float(cfg.region[0]), format_float(cfg.region[1])),
        format!("grid: L={} M_x={} M_xi={}", format_float(cfg.grid.half_width), cfg.grid.points, cfg.grid.xi_points),
    ];
    let eps: Vec<String> = eps.iter().map(|&e| format_float(e)).collect();
    lines.push(format!("eps: [{}]", eps.join(", ")));
    if cfg.output.record_timing {
        let now = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        lines.push(format!("unix_time: {now}"));
    }
    lines
}

pub fn write_f64_le(path: &Path, values: &[f64]) -> io::Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, bytes)
}

pub fn read_f64_le(path: &Path) -> io::Result<Vec<f64>> {
    let bytes = std::fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "length is not a multiple of 8"));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect())
}

/// Sidecar describing a dense field dump.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldSidecar {
    pub data: String,
    pub dtype: &'static str,
    /// `[M_x, M_xi]`, row-major with x slowest.
    pub shape: [usize; 2],
    pub x_axis: String,
    pub xi_axis: String,
    pub t: f64,
    pub measurements: Option<usize>,
    pub hbar: f64,
    pub mass: f64,
    pub config_sha256: String,
    pub version: &'static str,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    std::fs::write(path, text)
}
