//! Experiment output: JSON documents and whitespace-delimited column files.

use crate::decoupling::{DecDomain, Manifold, ScaleKind};
use crate::Result;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

/// A numeric table written as `# col1 col2 ...` followed by one row per
/// line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_dat(&self) -> String {
        let mut out = format!("# {}\n", self.columns.join(" "));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
            let _ = writeln!(out, "{}", cells.join(" "));
        }
        out
    }

    pub fn write_dat(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_dat())?;
        Ok(())
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// One decoupling lower-bound measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecRecord {
    pub manifold: Manifold,
    pub delta: f64,
    pub alpha: f64,
    pub scale_kind: ScaleKind,
    pub caps: usize,
    pub samples_per_cap: usize,
    pub p: f64,
    pub r: f64,
    pub lower_bound: f64,
    pub domain: DecDomain,
}
