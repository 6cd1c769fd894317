//! Artifact writing and the run manifest.
//!
//! Every run writes its files plus `manifest.json`, which records the tool
//! version, the resolved parameters and their SHA-256, the seed, and the SHA-256
//! of each output. Nothing time-dependent goes in, so rerunning a theory command
//! with the same configuration reproduces every byte.

use crate::config::Format;
use crate::error::CliError;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const OUTPUT_DIR_ENV: &str = "SBM_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "sbm-out";

/// `--out`, then the config file, then `$SBM_OUTPUT_DIR`, then `sbm-out`.
pub fn output_dir(flag: Option<PathBuf>, config: Option<PathBuf>) -> PathBuf {
    flag.or(config)
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
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

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => v.to_string(),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Int(v) => Value::from(*v),
            Cell::Text(s) => Value::from(s.as_str()),
        }
    }
}

/// A flat table, written as CSV or as a JSON array of records.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Reads CSV produced by the core writers; numeric fields become numbers.
    pub fn from_csv(text: &str) -> Self {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("").split(',').map(str::to_string).collect();
        let rows = lines
            .filter(|l| !l.is_empty())
            .map(|l| {
                l.split(',')
                    .map(|f| f.parse::<f64>().map_or_else(|_| Cell::Text(f.to_string()), Cell::Num))
                    .collect()
            })
            .collect();
        Self { header, rows }
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.iter().map(Cell::csv).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    Value::Object(self.header.iter().cloned().zip(row.iter().map(Cell::json)).collect())
                })
                .collect(),
        )
    }
}

#[derive(Serialize)]
struct OutputEntry {
    file: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    params: &'a Value,
    config_sha256: String,
    seed: Option<u64>,
    outputs: &'a [OutputEntry],
}

/// Collects the files of one run and writes them, then the manifest.
pub struct Output {
    dir: PathBuf,
    format: Format,
    written: Vec<OutputEntry>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

impl Output {
    pub fn create(dir: PathBuf, format: Format) -> Result<Self, CliError> {
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir, format, written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn format(&self) -> Format {
        self.format
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        std::fs::write(self.dir.join(name), bytes)?;
        self.written.push(OutputEntry { file: name.to_string(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    /// Writes `stem.csv` or `stem.json` according to the run format.
    pub fn write_table(&mut self, stem: &str, table: &Table) -> Result<(), CliError> {
        match self.format {
            Format::Csv => self.write_bytes(&format!("{stem}.csv"), table.to_csv().as_bytes()),
            Format::Json => self.write_json(&format!("{stem}.json"), &table.to_json()),
        }
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        self.write_bytes(name, &to_json_bytes(value)?)
    }

    /// Writes `manifest.json` and returns the list of files written, manifest last.
    pub fn finish(self, command: &str, params: &Value, seed: Option<u64>) -> Result<Vec<PathBuf>, CliError> {
        let manifest = Manifest {
            tool: "sbm",
            version: env!("CARGO_PKG_VERSION"),
            command,
            params,
            config_sha256: sha256_hex(&serde_json::to_vec(params)?),
            seed,
            outputs: &self.written,
        };
        let bytes = to_json_bytes(&manifest)?;
        std::fs::write(self.dir.join("manifest.json"), bytes)?;
        let mut files: Vec<PathBuf> = self.written.iter().map(|o| self.dir.join(&o.file)).collect();
        files.push(self.dir.join("manifest.json"));
        Ok(files)
    }
}
