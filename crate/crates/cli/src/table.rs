//! Tabular results and their CSV / JSON sidecar emission.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::ExperimentConfig;

/// Columns shared by every fidelity sweep, in order.
pub const SWEEP_COLUMNS: [&str; 8] = [
    "param",
    "bare_mean",
    "bare_stderr",
    "denoised_mean",
    "denoised_stderr",
    "success_mean",
    "analytic",
    "analytic_tol",
];

/// One row per grid point, ordered by grid index. `None` cells are written
/// empty.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl SweepResult {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Full-precision CSV: `{:.16e}` (17 significant digits), `inf` for
    /// unbounded values, LF line endings.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                match cell {
                    None => {}
                    Some(x) if x.is_infinite() => {
                        out.push_str(if *x > 0.0 { "inf" } else { "-inf" })
                    }
                    Some(x) => write!(out, "{x:.16e}").unwrap(),
                }
            }
            out.push('\n');
        }
        out
    }

    /// Rows whose `analytic` cell is set but further than `analytic_tol`
    /// from the simulated column `sim`.
    pub fn analytic_violations(&self, sim: &str) -> Vec<usize> {
        let (Some(s), Some(a), Some(t)) = (
            self.column_index(sim),
            self.column_index("analytic"),
            self.column_index("analytic_tol"),
        ) else {
            return Vec::new();
        };
        self.rows
            .iter()
            .enumerate()
            .filter_map(|(i, r)| match (r[s], r[a], r[t]) {
                (Some(x), Some(y), Some(tol)) if (x - y).abs() > tol => Some(i),
                _ => None,
            })
            .collect()
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    version: &'static str,
    config: &'a ExperimentConfig,
    grid_points: Vec<f64>,
    columns: &'a [String],
    rows: usize,
}

/// Writes `<stem>.csv` and `<stem>.json`, creating parent directories.
pub fn write_outputs(cfg: &ExperimentConfig, result: &SweepResult) -> Result<()> {
    let csv = cfg.csv_path().context("output: no output path")?;
    let json = cfg.sidecar_path().context("output: no output path")?;
    if let Some(dir) = csv.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    write_file(&csv, &result.to_csv())?;
    let side = Sidecar {
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        grid_points: cfg.grid.points()?,
        columns: &result.columns,
        rows: result.rows.len(),
    };
    let mut text = serde_json::to_string_pretty(&side)?;
    text.push('\n');
    write_file(&json, &text)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
