//! Output directory with provenance-stamped CSV, JSON and text files.
//!
//! Units in CSV headers: `[J]` energy in units of the hopping amplitude,
//! `[1/J]` time, `[1]` dimensionless, `[count]` integer counts.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

/// One CSV cell.
#[derive(Debug, Clone)]
pub enum Cell {
    F(f64),
    U(u64),
    S(String),
    B(bool),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::U(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::U(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::B(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::S(v)
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            // shortest round-trip form, so reruns compare byte for byte
            Cell::F(v) => format!("{v:e}"),
            Cell::U(v) => v.to_string(),
            Cell::B(v) => v.to_string(),
            Cell::S(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Builds a row from heterogeneous values.
#[macro_export]
#[doc(hidden)]
macro_rules! cells {
    ($($x:expr),* $(,)?) => {
        vec![$($crate::cli::output::Cell::from($x)),*]
    };
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    config_hash: &'a str,
    seed: u64,
    data: &'a T,
}

#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    config_hash: String,
    seed: u64,
    written: Vec<String>,
}

impl OutputDir {
    /// Creates `root`; an existing non-empty directory is replaced only with `force`.
    pub fn create(root: &Path, config_hash: &str, seed: u64, force: bool) -> Result<Self> {
        if root.exists() {
            let occupied = fs::read_dir(root)?.next().is_some();
            if occupied && !force {
                return Err(Error::config(
                    "out",
                    format!("{} already holds results; rerun with --force to replace them", root.display()),
                ));
            }
            if occupied {
                fs::remove_dir_all(root)?;
            }
        }
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), config_hash: config_hash.to_string(), seed, written: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    fn stamp(&self) -> String {
        format!("# config_hash={} seed={}\n", self.config_hash, self.seed)
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.root.join(name), bytes)?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn csv(&mut self, name: &str, table: &Table) -> Result<()> {
        let mut w = csv::Writer::from_writer(self.stamp().into_bytes());
        let fail = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(&table.header).map_err(fail)?;
        for row in &table.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(fail)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        self.put(name, &bytes)
    }

    /// JSON envelope `{config_hash, seed, data}`.
    pub fn json<T: Serialize>(&mut self, name: &str, data: &T) -> Result<()> {
        let env = Stamped { config_hash: &self.config_hash, seed: self.seed, data };
        let mut s = serde_json::to_string_pretty(&env)?;
        s.push('\n');
        self.put(name, s.as_bytes())
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let s = format!("{}{body}", self.stamp());
        self.put(name, s.as_bytes())
    }

    /// Records a file written by another routine.
    pub fn register(&mut self, name: &str) {
        self.written.push(name.to_string());
    }

    /// Writes the manifest without recording it as a data file.
    pub fn manifest<T: Serialize>(&self, data: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(data)?;
        s.push('\n');
        fs::write(self.root.join(MANIFEST), s)?;
        Ok(())
    }
}

pub const MANIFEST: &str = "manifest.json";
