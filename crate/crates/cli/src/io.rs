//! CSV and JSON artifacts. Floats are written with 17 significant digits so
//! they round-trip exactly.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sns::{ChainSummary, CoordStats, SummaryWindow};

use crate::error::{CliError, Result};

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_csv<I, R>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let err = |e| CliError::csv(path, e);
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Reads a headered numeric CSV into a matrix, one row per record.
pub fn read_matrix(path: &Path) -> Result<(Vec<String>, DMatrix<f64>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::csv(path, e))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| CliError::csv(path, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut values = Vec::new();
    let mut nrows = 0;
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::csv(path, e))?;
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                CliError::config(format!(
                    "{}: row {}, column {}: cannot parse {field:?} as a number",
                    path.display(),
                    i + 1,
                    j + 1
                ))
            })?;
            values.push(v);
        }
        nrows += 1;
    }
    if nrows == 0 {
        return Err(CliError::config(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    let ncols = header.len();
    Ok((header, DMatrix::from_row_slice(nrows, ncols, &values)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonWindow {
    pub nburnin: usize,
    pub end: usize,
    pub thin: usize,
}

impl From<SummaryWindow> for JsonWindow {
    fn from(w: SummaryWindow) -> Self {
        JsonWindow {
            nburnin: w.nburnin,
            end: w.end,
            thin: w.thin,
        }
    }
}

impl From<&JsonWindow> for SummaryWindow {
    fn from(w: &JsonWindow) -> Self {
        SummaryWindow {
            nburnin: w.nburnin,
            end: w.end,
            thin: w.thin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonCoord {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub ess: f64,
    #[serde(rename = "q2.5")]
    pub q025: f64,
    #[serde(rename = "q50")]
    pub q50: f64,
    #[serde(rename = "q97.5")]
    pub q975: f64,
    pub p_value: f64,
}

impl JsonCoord {
    pub fn new(name: String, c: &CoordStats) -> Self {
        JsonCoord {
            name,
            mean: c.mean,
            sd: c.sd,
            ess: c.ess,
            q025: c.quantiles[0],
            q50: c.quantiles[1],
            q975: c.quantiles[2],
            p_value: c.p_value,
        }
    }
}

/// Machine-readable run summary, `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonSummary {
    pub schema: u32,
    pub dim: usize,
    pub niter: usize,
    pub nnr: usize,
    pub nsubsets: Option<usize>,
    pub seed: u64,
    pub window: JsonWindow,
    pub nominal_sample_size: usize,
    pub acceptance_rate: Option<f64>,
    pub reldev_mean: Option<f64>,
    pub coords: Vec<JsonCoord>,
    pub ess_min: f64,
    pub ess_median: f64,
    pub ess_max: f64,
}

impl JsonSummary {
    pub fn new(s: &ChainSummary, seed: u64, names: &[String]) -> Self {
        JsonSummary {
            schema: 1,
            dim: s.dim,
            niter: s.niter,
            nnr: s.nnr,
            nsubsets: s.nsubsets,
            seed,
            window: s.window.into(),
            nominal_sample_size: s.nominal_sample_size,
            acceptance_rate: s.acceptance_rate,
            reldev_mean: s.reldev_mean,
            coords: names
                .iter()
                .zip(&s.coords)
                .map(|(n, c)| JsonCoord::new(n.clone(), c))
                .collect(),
            ess_min: s.ess_summary.min,
            ess_median: s.ess_summary.median,
            ess_max: s.ess_summary.max,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let s: JsonSummary = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        if s.schema != 1 {
            return Err(CliError::config(format!(
                "{}: unsupported schema {}",
                path.display(),
                s.schema
            )));
        }
        Ok(s)
    }
}

pub fn stats_header(first: &str) -> Vec<String> {
    [
        first, "mean", "sd", "ess", "q2.5", "q50", "q97.5", "p_value",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

pub fn stats_row(label: String, c: &CoordStats) -> Vec<String> {
    let mut row = vec![label];
    row.extend(
        [
            c.mean,
            c.sd,
            c.ess,
            c.quantiles[0],
            c.quantiles[1],
            c.quantiles[2],
            c.p_value,
        ]
        .into_iter()
        .map(fmt_f64),
    );
    row
}
