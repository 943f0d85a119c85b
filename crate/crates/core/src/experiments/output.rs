use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::ExperimentError;

pub const TRAJECTORY_COLUMNS: [&str; 7] =
    ["epsilon", "t", "mean_sq", "mean_sq_se", "sup_mean_sq", "k_variation", "domain_violation"];
pub const MEANS_COLUMNS: [&str; 5] = ["epsilon", "t", "component", "mean", "se"];
pub const SNAPSHOT_COLUMNS: [&str; 5] = ["epsilon", "t", "particle", "component", "value"];
pub const AVERAGING_SUMMARY_COLUMNS: [&str; 7] =
    ["epsilon", "d_t", "se", "ci_low", "ci_high", "chebyshev_delta", "chebyshev_bound"];
pub const AVERAGING_SERIES_COLUMNS: [&str; 4] = ["epsilon", "t", "d", "se"];
pub const STABILITY_SERIES_COLUMNS: [&str; 3] = ["t", "mean_sq", "mean_sq_se"];
pub const VERDICT_COLUMNS: [&str; 4] = ["criterion", "parameters", "margin", "verdict"];
pub const ITO_COLUMNS: [&str; 2] = ["t", "residual"];
pub const AUDIT_COLUMNS: [&str; 4] = ["audit", "quantity", "value", "verdict"];

/// Owns one run directory and the list of files written into it.
pub(crate) struct RunDir {
    root: PathBuf,
    pub files: Vec<String>,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self, ExperimentError> {
        fs::create_dir_all(root).map_err(|e| ExperimentError::io(root, e))?;
        Ok(RunDir { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn csv(&mut self, name: &str, header: &[&str]) -> Result<CsvFile, ExperimentError> {
        let path = self.root.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| ExperimentError::io(&path, e))?;
        w.write_record(header).map_err(|e| ExperimentError::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(CsvFile { path, w, width: header.len() })
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), ExperimentError> {
        let path = self.root.join(name);
        let mut text = serde_json::to_string_pretty(value).map_err(|e| ExperimentError::io(&path, e))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| ExperimentError::io(&path, e))
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<(), ExperimentError> {
        let path = self.root.join(name);
        fs::write(&path, body).map_err(|e| ExperimentError::io(&path, e))
    }
}

pub(crate) struct CsvFile {
    path: PathBuf,
    w: csv::Writer<fs::File>,
    width: usize,
}

/// A CSV cell. Floats use the shortest representation that round-trips.
pub(crate) enum Cell<'a> {
    F(f64),
    U(usize),
    S(&'a str),
}

impl CsvFile {
    pub fn row(&mut self, cells: &[Cell<'_>]) -> Result<(), ExperimentError> {
        debug_assert_eq!(cells.len(), self.width);
        let rec: Vec<String> = cells
            .iter()
            .map(|c| match c {
                Cell::F(v) => format!("{v:?}"),
                Cell::U(v) => v.to_string(),
                Cell::S(s) => s.to_string(),
            })
            .collect();
        self.w.write_record(&rec).map_err(|e| ExperimentError::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<(), ExperimentError> {
        self.w.flush().map_err(|e| ExperimentError::io(&self.path, e))
    }
}
