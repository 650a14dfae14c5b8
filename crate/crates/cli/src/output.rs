use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

/// Everything a command produces; written under `--out` by [`Outcome::write`].
#[derive(Debug, Default)]
pub struct Outcome {
    pub passed: bool,
    /// Results section of summary.txt.
    pub results: toml::Table,
    /// `(file name, CSV text)`; the first table is data.csv.
    pub tables: Vec<(String, String)>,
    pub plots: Vec<(String, String)>,
}

impl Outcome {
    pub fn new(passed: bool) -> Self {
        Self { passed, ..Default::default() }
    }

    pub fn result(&mut self, key: &str, value: impl Into<toml::Value>) {
        self.results.insert(key.to_string(), value.into());
    }

    pub fn table<R: Serialize>(&mut self, name: &str, rows: &[R]) -> Result<()> {
        self.tables.push((name.to_string(), potlab::suite::csv_string(rows)?));
        Ok(())
    }

    /// Writes summary.txt, the CSV tables and plots/*.svg; returns the paths written.
    pub fn write(&self, dir: &Path, header: &toml::Table) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut doc = header.clone();
        doc.insert("status".into(), (if self.passed { "pass" } else { "fail" }).into());
        doc.insert("results".into(), toml::Value::Table(self.results.clone()));
        let mut written = Vec::new();
        let mut put = |path: PathBuf, text: &str| -> Result<()> {
            fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            written.push(path);
            Ok(())
        };
        put(dir.join("summary.txt"), &toml::to_string(&doc)?)?;
        for (name, csv) in &self.tables {
            put(dir.join(name), csv)?;
        }
        if !self.plots.is_empty() {
            let plots = dir.join("plots");
            fs::create_dir_all(&plots)?;
            for (name, svg) in &self.plots {
                put(plots.join(name), svg)?;
            }
        }
        Ok(written)
    }
}

/// Infinite and NaN values are not valid TOML floats for every reader, so
/// they are written as strings.
pub fn num(x: f64) -> toml::Value {
    if x.is_finite() {
        toml::Value::Float(x)
    } else {
        toml::Value::String(x.to_string())
    }
}
