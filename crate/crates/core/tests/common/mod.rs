#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use sns::{DiffState, LogDensity, Result};

/// Central finite differences of `f` with step `1e-6 * max(1, |x_j|)`.
pub fn fd_gradient<T: LogDensity>(t: &T, x: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(x.len(), |j, _| {
        let h = 1e-6 * x[j].abs().max(1.0);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        (t.eval(&xp).unwrap().f - t.eval(&xm).unwrap().f) / (2.0 * h)
    })
}

/// Central finite differences of the analytic gradient.
pub fn fd_hessian<T: LogDensity>(t: &T, x: &DVector<f64>) -> DMatrix<f64> {
    let k = x.len();
    let mut h = DMatrix::zeros(k, k);
    for j in 0..k {
        let step = 1e-6 * x[j].abs().max(1.0);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += step;
        xm[j] -= step;
        let col = (t.eval(&xp).unwrap().grad - t.eval(&xm).unwrap().grad) / (2.0 * step);
        h.set_column(j, &col);
    }
    h
}

pub fn assert_close_rel(a: f64, b: f64, tol: f64, what: &str) {
    let scale = a.abs().max(b.abs()).max(1.0);
    assert!(
        (a - b).abs() <= tol * scale,
        "{what}: {a} vs {b} (tol {tol} relative)"
    );
}

/// Gaussian parameters drawn the way the three-dimensional example does:
/// mean uniform on (-0.5, 0.5), off-diagonal precision uniform on (0.1, 0.2)
/// then symmetrized, diagonal fixed at 0.5.
pub fn example_gaussian<R: Rng>(k: usize, rng: &mut R) -> (DVector<f64>, DMatrix<f64>) {
    let mu = DVector::from_fn(k, |_, _| rng.random_range(-0.5..0.5));
    let raw = DMatrix::from_fn(k, k, |_, _| rng.random_range(0.1..0.2));
    let mut prec: DMatrix<f64> = (&raw + raw.transpose()) * 0.5;
    prec.fill_diagonal(0.5);
    (mu, prec)
}

/// Random symmetric positive-definite matrix `A A' + k I`.
pub fn random_spd<R: Rng>(k: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(k, k) * k as f64
}

/// Poisson log-link MLE by iteratively reweighted least squares, solving each
/// weighted normal system with a dense LU.
pub fn irls_poisson(x: &DMatrix<f64>, y: &DVector<f64>, iters: usize) -> DVector<f64> {
    let (n, k) = x.shape();
    let mut beta = DVector::zeros(k);
    for _ in 0..iters {
        let eta = x * &beta;
        let mu = eta.map(f64::exp);
        let z = DVector::from_fn(n, |i, _| eta[i] + (y[i] - mu[i]) / mu[i]);
        let mut xtw = x.transpose();
        for i in 0..n {
            xtw.column_mut(i).scale_mut(mu[i]);
        }
        let lhs = &xtw * x;
        let rhs = &xtw * z;
        let next = lhs
            .lu()
            .solve(&rhs)
            .expect("IRLS normal equations are singular");
        let delta = (&next - &beta).amax();
        beta = next;
        if delta < 1e-14 {
            break;
        }
    }
    beta
}

/// f(x) = sum_j [ -x_j^2 / 2 - x_j^4 / 4 + a_j x_j ], concave and separable.
pub struct SeparableQuartic {
    pub a: Vec<f64>,
}

pub fn quartic_1d(v: f64, a: f64) -> (f64, f64, f64) {
    (
        -0.5 * v * v - 0.25 * v.powi(4) + a * v,
        -v - v.powi(3) + a,
        -1.0 - 3.0 * v * v,
    )
}

impl LogDensity for SeparableQuartic {
    fn dim(&self) -> usize {
        self.a.len()
    }

    fn eval(&self, x: &DVector<f64>) -> Result<DiffState> {
        let k = self.a.len();
        let mut f = 0.0;
        let mut g = DVector::zeros(k);
        let mut h = DMatrix::zeros(k, k);
        for j in 0..k {
            let (fj, gj, hj) = quartic_1d(x[j], self.a[j]);
            f += fj;
            g[j] = gj;
            h[(j, j)] = hj;
        }
        DiffState::new(f, g, h)
    }
}
