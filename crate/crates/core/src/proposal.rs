//! Local Gaussian proposal.
//!
//! A second-order Taylor expansion of a concave log-density at `x0` is a
//! Gaussian with precision `-H(x0)` and mean at the Newton point
//! `x0 - H(x0)^-1 g(x0)`. The precision is kept as its lower Cholesky factor,
//! which serves the Newton solve, sampling, and the density evaluation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SnsError};
use crate::linalg;
use crate::model::{check_len, DiffState};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFit {
    mean: DVector<f64>,
    prec_chol: DMatrix<f64>,
    log_det_prec: f64,
}

impl GaussianFit {
    /// Builds a fit directly from a mean and a precision matrix.
    pub fn from_precision(mean: DVector<f64>, prec: &DMatrix<f64>) -> Result<Self> {
        check_len("precision rows", mean.len(), prec.nrows())?;
        let prec_chol = linalg::cholesky(&linalg::symmetrize(prec))
            .map_err(|pivot| SnsError::NotPositiveDefinite { pivot })?;
        let log_det_prec = linalg::log_det_from_chol(&prec_chol);
        Ok(GaussianFit {
            mean,
            prec_chol,
            log_det_prec,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Lower factor `L` with `L L' = -H`.
    pub fn prec_chol(&self) -> &DMatrix<f64> {
        &self.prec_chol
    }

    pub fn log_det_prec(&self) -> f64 {
        self.log_det_prec
    }

    pub fn precision(&self) -> DMatrix<f64> {
        &self.prec_chol * self.prec_chol.transpose()
    }

    /// Maps standard normal deviates `z` to `mean + L'^-1 z`.
    pub fn transform(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.mean + linalg::solve_lower_transpose(&self.prec_chol, z)
    }

    /// Draws one proposal, consuming exactly `dim()` standard normals.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|_| rng.sample(StandardNormal)),
        );
        self.transform(&z)
    }

    pub fn log_pdf(&self, x: &DVector<f64>) -> f64 {
        let d = x - &self.mean;
        let w = self.prec_chol.tr_mul(&d);
        -0.5 * self.dim() as f64 * LN_2PI + 0.5 * self.log_det_prec - 0.5 * w.norm_squared()
    }
}

/// Fits the Newton-step Gaussian at `at` from the derivatives in `ds`.
pub fn fit_gaussian(at: &DVector<f64>, ds: &DiffState) -> Result<GaussianFit> {
    check_len("fit point", ds.dim(), at.len())?;
    ds.validate()?;
    let neg_h = -linalg::symmetrize(&ds.hess);
    let prec_chol =
        linalg::cholesky(&neg_h).map_err(|pivot| SnsError::NotNegativeDefinite { pivot })?;
    // (-H)^-1 g via two triangular solves.
    let step =
        linalg::solve_lower_transpose(&prec_chol, &linalg::solve_lower(&prec_chol, &ds.grad));
    let mean = at + step;
    if mean.iter().any(|v| !v.is_finite()) {
        return Err(SnsError::NonFinite("Newton step"));
    }
    let log_det_prec = linalg::log_det_from_chol(&prec_chol);
    Ok(GaussianFit {
        mean,
        prec_chol,
        log_det_prec,
    })
}
