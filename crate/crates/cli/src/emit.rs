//! Deterministic CSV, JSON and text artifacts.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::CliError;

/// Provenance of an output file, written as its first line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: Option<u64>,
    pub config_sha256: String,
}

impl Meta {
    pub fn new(command: &str, cfg: &ExperimentConfig) -> Self {
        Meta {
            tool: "treesplit",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            seed: cfg.seed,
            config_sha256: config_hash(command, cfg),
        }
    }

    pub fn comment_line(&self, marker: &str) -> String {
        let seed = self.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
        format!(
            "{marker} {} {} command={} seed={seed} config_sha256={}\n",
            self.tool, self.version, self.command, self.config_sha256
        )
    }
}

/// SHA-256 of the command name and the resolved configuration, with the
/// output directory left out so relocated runs hash the same.
pub fn config_hash(command: &str, cfg: &ExperimentConfig) -> String {
    let canonical = ExperimentConfig {
        out_dir: None,
        ..cfg.clone()
    };
    let json = serde_json::to_string(&canonical).expect("config serialises");
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update([0]);
    h.update(json.as_bytes());
    hex::encode(h.finalize())
}

/// `x` with 12 significant digits, fixed notation for moderate magnitudes
/// and scientific otherwise, trailing zeros removed.
pub fn fmt_float(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// A CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i128),
    Float(f64),
    Text(String),
    Bool(bool),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => fmt_float(*v),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(i128::from(v))
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(i128::from(v))
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i128)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
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

/// Column names plus rows, written in the given order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self, meta: &Meta) -> Vec<u8> {
        let mut out = meta.comment_line("#").into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&self.columns).expect("in-memory write");
            for row in &self.rows {
                w.write_record(row.iter().map(Cell::render)).expect("in-memory write");
            }
            w.flush().expect("in-memory write");
        }
        out
    }
}

/// Writes artifacts into one directory and remembers what it wrote.
#[derive(Debug)]
pub struct OutDir {
    root: PathBuf,
    pub written: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(root: PathBuf) -> Result<Self, CliError> {
        std::fs::create_dir_all(&root).map_err(|source| CliError::Io {
            path: root.clone(),
            source,
        })?;
        Ok(OutDir {
            root,
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        write_file(&path, bytes)?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn write_csv(&mut self, name: &str, meta: &Meta, table: &Table) -> Result<PathBuf, CliError> {
        self.write_bytes(name, &table.to_csv(meta))
    }

    /// `{"meta": …, <key>: …}` pretty-printed with a trailing newline.
    pub fn write_json<T: Serialize>(
        &mut self,
        name: &str,
        meta: &Meta,
        key: &str,
        value: &T,
    ) -> Result<PathBuf, CliError> {
        let mut doc = serde_json::Map::new();
        doc.insert("meta".into(), serde_json::to_value(meta).expect("meta serialises"));
        doc.insert(
            key.into(),
            serde_json::to_value(value).map_err(|e| CliError::Run(e.to_string()))?,
        );
        let mut text = serde_json::to_string_pretty(&serde_json::Value::Object(doc)).expect("value serialises");
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_float(0.924201273691125), "0.924201273691");
        assert_eq!(fmt_float(10.0 / 3.0), "3.33333333333");
        assert_eq!(fmt_float(2.0), "2");
        assert_eq!(fmt_float(1234567.0), "1234567");
        assert_eq!(fmt_float(3.1e-7), "3.1e-7");
        assert_eq!(fmt_float(-0.5), "-0.5");
        assert_eq!(fmt_float(6.02214076e23), "6.02214076e23");
        assert_eq!(fmt_float(0.0), "0");
    }

    #[test]
    fn hash_ignores_the_output_directory() {
        let a = ExperimentConfig {
            seed: Some(1),
            ..Default::default()
        };
        let b = ExperimentConfig {
            out_dir: Some("/tmp/x".into()),
            ..a.clone()
        };
        assert_eq!(config_hash("simulate", &a), config_hash("simulate", &b));
        assert_ne!(config_hash("simulate", &a), config_hash("sweep", &a));
        let c = ExperimentConfig {
            seed: Some(2),
            ..a.clone()
        };
        assert_ne!(config_hash("simulate", &a), config_hash("simulate", &c));
    }

    #[test]
    fn csv_starts_with_the_comment_line() {
        let cfg = ExperimentConfig {
            seed: Some(7),
            ..Default::default()
        };
        let meta = Meta::new("analytic", &cfg);
        let mut t = Table::new(&["n", "x"]);
        t.push(vec![1u64.into(), 0.5.into()]);
        let text = String::from_utf8(t.to_csv(&meta)).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# treesplit "));
        assert_eq!(lines.next(), Some("n,x"));
        assert_eq!(lines.next(), Some("1,0.5"));
    }
}
