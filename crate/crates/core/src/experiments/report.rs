use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::fmt_metric;

use super::config::{ExperimentConfig, Protocol};

/// One CSV output.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File stem; written as `<name>.csv`.
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Table {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width in {}", self.name);
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }

    /// Column `name` of every row.
    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }
}

/// Mean, minimum and maximum over the trials where a metric was defined.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Summary {
    pub mean: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub defined: usize,
}

pub fn summarize(values: impl IntoIterator<Item = Option<f64>>) -> Summary {
    let v: Vec<f64> = values.into_iter().flatten().collect();
    if v.is_empty() {
        return Summary::default();
    }
    Summary {
        mean: Some(v.iter().sum::<f64>() / v.len() as f64),
        min: v.iter().copied().reduce(f64::min),
        max: v.iter().copied().reduce(f64::max),
        defined: v.len(),
    }
}

impl Summary {
    pub fn cells(&self) -> [String; 3] {
        [
            fmt_metric(self.mean),
            fmt_metric(self.min),
            fmt_metric(self.max),
        ]
    }
}

pub fn metric_columns(prefix: &str) -> [String; 3] {
    [
        format!("{prefix}_mean"),
        format!("{prefix}_min"),
        format!("{prefix}_max"),
    ]
}

/// A finished output file.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub file_name: String,
    pub contents: String,
}

impl From<&Table> for OutputFile {
    fn from(t: &Table) -> Self {
        OutputFile {
            file_name: t.file_name(),
            contents: t.to_csv(),
        }
    }
}

#[derive(Serialize)]
struct RunManifest<'a> {
    version: &'a str,
    protocol: Protocol,
    outputs: Vec<String>,
    config: &'a ExperimentConfig,
}

pub const RUN_MANIFEST: &str = "run.toml";

/// Writes every output plus a `run.toml` that records the version string, the
/// output files and the fully resolved configuration. Returns the manifest
/// path.
pub fn write_outputs(
    dir: &Path,
    cfg: &ExperimentConfig,
    outputs: &[OutputFile],
) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for o in outputs {
        let path = dir.join(&o.file_name);
        std::fs::write(&path, &o.contents).map_err(|e| Error::io(&path, e))?;
    }
    let manifest = RunManifest {
        version: crate::VERSION,
        protocol: cfg.protocol,
        outputs: outputs.iter().map(|o| o.file_name.clone()).collect(),
        config: cfg,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::format(e.to_string()))?;
    let path = dir.join(RUN_MANIFEST);
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
