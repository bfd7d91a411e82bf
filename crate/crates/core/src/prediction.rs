//! Sample-based prediction: push every retained state through a user function
//! and summarize the resulting distribution row by row.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::diagnostics::{write_stats_table, CoordStats, SummaryWindow};
use crate::error::{Result, SnsError};
use crate::model::ScalarBaseModel;
use crate::sampler::ChainOutput;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictionKind {
    /// Deterministic function of the state, such as a mean response.
    Deterministic,
    /// Draws from a predictive distribution given the state.
    Stochastic,
}

/// One row per predicted quantity, one column per retained sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    pub values: DMatrix<f64>,
    pub kind: PredictionKind,
}

fn assemble<I>(columns: I, kind: PredictionKind) -> Result<PredictionMatrix>
where
    I: Iterator<Item = Result<Vec<f64>>>,
{
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for c in columns {
        let c = c?;
        if let Some(first) = cols.first() {
            if c.len() != first.len() {
                return Err(SnsError::contract(format!(
                    "prediction function returned {} values for sample {} but {} for sample 0",
                    c.len(),
                    cols.len(),
                    first.len()
                )));
            }
        }
        cols.push(c);
    }
    let m = cols.first().map_or(0, Vec::len);
    let values = DMatrix::from_fn(m, cols.len(), |i, j| cols[j][i]);
    Ok(PredictionMatrix { values, kind })
}

/// Applies a deterministic `fpred` to every retained sample, in iteration order.
pub fn predict<F>(chain: &ChainOutput, window: &SummaryWindow, fpred: F) -> Result<PredictionMatrix>
where
    F: FnMut(&DVector<f64>) -> Result<Vec<f64>>,
{
    predict_samples(&chain.samples, window, fpred)
}

/// Applies a stochastic `fpred` to every retained sample, sequentially, with an
/// explicit random stream.
pub fn predict_with_rng<F, R>(
    chain: &ChainOutput,
    window: &SummaryWindow,
    rng: &mut R,
    fpred: F,
) -> Result<PredictionMatrix>
where
    F: FnMut(&DVector<f64>, &mut R) -> Result<Vec<f64>>,
    R: Rng + ?Sized,
{
    predict_samples_with_rng(&chain.samples, window, rng, fpred)
}

/// As [`predict`], on a bare sample matrix (one row per iteration).
pub fn predict_samples<F>(
    samples: &DMatrix<f64>,
    window: &SummaryWindow,
    mut fpred: F,
) -> Result<PredictionMatrix>
where
    F: FnMut(&DVector<f64>) -> Result<Vec<f64>>,
{
    window.validate(samples.nrows())?;
    assemble(
        window.rows().map(|i| fpred(&samples.row(i).transpose())),
        PredictionKind::Deterministic,
    )
}

/// As [`predict_with_rng`], on a bare sample matrix.
pub fn predict_samples_with_rng<F, R>(
    samples: &DMatrix<f64>,
    window: &SummaryWindow,
    rng: &mut R,
    mut fpred: F,
) -> Result<PredictionMatrix>
where
    F: FnMut(&DVector<f64>, &mut R) -> Result<Vec<f64>>,
    R: Rng + ?Sized,
{
    window.validate(samples.nrows())?;
    assemble(
        window
            .rows()
            .map(|i| fpred(&samples.row(i).transpose(), rng)),
        PredictionKind::Stochastic,
    )
}

/// Mean response `g^-1(X_new beta)` for a one-parameter GLM.
pub fn glm_mean_response<B: ScalarBaseModel + ?Sized>(
    base: &B,
    x_new: &DMatrix<f64>,
    beta: &DVector<f64>,
) -> Result<Vec<f64>> {
    crate::model::check_len("coefficient vector", x_new.ncols(), beta.len())?;
    (x_new * beta).iter().map(|&u| base.mean(u)).collect()
}

/// Poisson posterior-predictive draw `y ~ Poisson(exp(X_new beta))`.
pub fn poisson_draw<R: Rng + ?Sized>(
    x_new: &DMatrix<f64>,
    beta: &DVector<f64>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let means = glm_mean_response(&crate::model::PoissonLog, x_new, beta)?;
    means
        .into_iter()
        .map(|lambda| {
            if lambda == 0.0 {
                return Ok(0.0);
            }
            let d = Poisson::new(lambda)
                .map_err(|e| SnsError::contract(format!("Poisson mean {lambda}: {e}")))?;
            Ok(d.sample(rng))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSummary {
    pub nominal_sample_size: usize,
    pub rows: Vec<CoordStats>,
}

/// Row-wise statistics of a prediction matrix.
pub fn summarize_prediction(pm: &PredictionMatrix) -> PredictionSummary {
    let rows = pm
        .values
        .row_iter()
        .map(|r| CoordStats::of(&r.iter().copied().collect::<Vec<_>>()))
        .collect();
    PredictionSummary {
        nominal_sample_size: pm.values.ncols(),
        rows,
    }
}

impl fmt::Display for PredictionSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "prediction sample statistics:")?;
        writeln!(f, "\t(nominal sample size: {})", self.nominal_sample_size)?;
        write_stats_table(f, &self.rows)
    }
}
