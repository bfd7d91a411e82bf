//! Target log-densities.
//!
//! A target maps a state vector to its log-density together with the gradient
//! and Hessian ([`DiffState`]). Two families are built in: the multivariate
//! Gaussian and one-parameter GLM likelihoods assembled by [`GlmTarget`] from
//! scalar derivatives of a base distribution with respect to the linear
//! predictor.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SnsError};
use crate::linalg;

/// Relative tolerance used when checking Hessian symmetry.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Log-density value, gradient and Hessian at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffState {
    pub f: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

impl DiffState {
    pub fn new(f: f64, grad: DVector<f64>, hess: DMatrix<f64>) -> Result<Self> {
        let ds = DiffState { f, grad, hess };
        ds.validate()?;
        Ok(ds)
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    /// Checks shapes, finiteness and Hessian symmetry.
    pub fn validate(&self) -> Result<()> {
        let k = self.grad.len();
        if self.hess.nrows() != k || self.hess.ncols() != k {
            return Err(SnsError::Dimension {
                what: "Hessian rows/columns",
                expected: k,
                found: if self.hess.nrows() != k {
                    self.hess.nrows()
                } else {
                    self.hess.ncols()
                },
            });
        }
        if !self.f.is_finite() {
            return Err(SnsError::NonFinite("log-density value"));
        }
        if self.grad.iter().any(|v| !v.is_finite()) {
            return Err(SnsError::NonFinite("gradient"));
        }
        if self.hess.iter().any(|v| !v.is_finite()) {
            return Err(SnsError::NonFinite("Hessian"));
        }
        for i in 0..k {
            for j in (i + 1)..k {
                let (a, b) = (self.hess[(i, j)], self.hess[(j, i)]);
                if (a - b).abs() > SYMMETRY_TOL * a.abs().max(b.abs()).max(1.0) {
                    return Err(SnsError::Asymmetric {
                        row: i,
                        col: j,
                        upper: a,
                        lower: b,
                    });
                }
            }
        }
        Ok(())
    }
}

/// A twice-differentiable log-density over R^K.
///
/// Implementations must be deterministic and must validate the length of `x`.
pub trait LogDensity: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &DVector<f64>) -> Result<DiffState>;
}

impl<T: LogDensity + ?Sized> LogDensity for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn eval(&self, x: &DVector<f64>) -> Result<DiffState> {
        (**self).eval(x)
    }
}

impl<T: LogDensity + ?Sized> LogDensity for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn eval(&self, x: &DVector<f64>) -> Result<DiffState> {
        (**self).eval(x)
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(SnsError::Dimension {
            what,
            expected,
            found,
        });
    }
    Ok(())
}

/// Multivariate Gaussian parameterised by mean and precision.
#[derive(Debug, Clone)]
pub struct MvGaussian {
    mu: DVector<f64>,
    prec: DMatrix<f64>,
    log_norm: f64,
}

impl MvGaussian {
    pub fn new(mu: DVector<f64>, prec: DMatrix<f64>) -> Result<Self> {
        let k = mu.len();
        if k == 0 {
            return Err(SnsError::contract("Gaussian dimension must be positive"));
        }
        check_len("precision rows", k, prec.nrows())?;
        check_len("precision columns", k, prec.ncols())?;
        if mu.iter().chain(prec.iter()).any(|v| !v.is_finite()) {
            return Err(SnsError::NonFinite("Gaussian parameters"));
        }
        let chol = linalg::cholesky(&linalg::symmetrize(&prec))
            .map_err(|pivot| SnsError::NotPositiveDefinite { pivot })?;
        let log_det = linalg::log_det_from_chol(&chol);
        let log_norm = -0.5 * k as f64 * (2.0 * std::f64::consts::PI).ln() + 0.5 * log_det;
        Ok(MvGaussian { mu, prec, log_norm })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.prec
    }
}

impl LogDensity for MvGaussian {
    fn dim(&self) -> usize {
        self.mu.len()
    }

    fn eval(&self, x: &DVector<f64>) -> Result<DiffState> {
        check_len("state vector", self.mu.len(), x.len())?;
        let d = x - &self.mu;
        let pd = &self.prec * &d;
        let f = self.log_norm - 0.5 * d.dot(&pd);
        DiffState::new(f, -pd, -self.prec.clone())
    }
}

/// Scalar log-likelihood of one observation as a function of its linear
/// predictor `u`, with first and second derivatives in `u`.
pub trait ScalarBaseModel: Send + Sync {
    fn eval(&self, u: f64, y: f64) -> Result<(f64, f64, f64)>;

    /// Inverse link: mean response for linear predictor `u`.
    fn mean(&self, u: f64) -> Result<f64>;
}

/// Largest accepted |u| before `exp(u)` is considered an overflow.
pub const MAX_LINEAR_PREDICTOR: f64 = 700.0;

/// Poisson likelihood with log link.
#[derive(Debug, Clone, Copy, Default)]
pub struct PoissonLog;

impl PoissonLog {
    fn exp_checked(u: f64) -> Result<f64> {
        if !u.is_finite() || u.abs() > MAX_LINEAR_PREDICTOR {
            return Err(SnsError::Overflow { u });
        }
        Ok(u.exp())
    }
}

/// `log(y!)`, summed directly for small counts and via Stirling's series above.
pub fn ln_factorial(y: u64) -> f64 {
    if y < 64 {
        (2..=y).map(|k| (k as f64).ln()).sum()
    } else {
        let n = y as f64;
        let n2 = n * n;
        n * n.ln() - n + 0.5 * (2.0 * std::f64::consts::PI * n).ln() + 1.0 / (12.0 * n)
            - 1.0 / (360.0 * n * n2)
            + 1.0 / (1260.0 * n2 * n2 * n)
    }
}

fn count(y: f64) -> Result<u64> {
    if !(y >= 0.0) || y.fract() != 0.0 || y > u64::MAX as f64 {
        return Err(SnsError::contract(format!(
            "Poisson response must be a nonnegative integer, got {y}"
        )));
    }
    Ok(y as u64)
}

/// Poisson base derivatives in the linear predictor.
pub fn poisson_base(u: f64, y: u64) -> Result<(f64, f64, f64)> {
    let mu = PoissonLog::exp_checked(u)?;
    let yf = y as f64;
    Ok((yf * u - mu - ln_factorial(y), yf - mu, -mu))
}

impl ScalarBaseModel for PoissonLog {
    fn eval(&self, u: f64, y: f64) -> Result<(f64, f64, f64)> {
        poisson_base(u, count(y)?)
    }

    fn mean(&self, u: f64) -> Result<f64> {
        PoissonLog::exp_checked(u)
    }
}

/// Design matrix and response for a regression likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct GlmData {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl GlmData {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(SnsError::contract(
                "design matrix needs at least one row and one column",
            ));
        }
        check_len("response vector", x.nrows(), y.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SnsError::NonFinite("design matrix"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(SnsError::NonFinite("response vector"));
        }
        Ok(GlmData { x, y })
    }

    pub fn nobs(&self) -> usize {
        self.x.nrows()
    }

    pub fn ncoef(&self) -> usize {
        self.x.ncols()
    }
}

/// Expands scalar base derivatives into the regression log-likelihood:
/// `f = sum f0(u_i, y_i)`, `g = X' g0`, `H = X' diag(h0) X` with `u = X beta`.
pub fn expand_glm_1par<B: ScalarBaseModel + ?Sized>(
    beta: &DVector<f64>,
    data: &GlmData,
    base: &B,
) -> Result<DiffState> {
    check_len("coefficient vector", data.ncoef(), beta.len())?;
    let u = &data.x * beta;
    let n = data.nobs();
    let mut f = 0.0;
    let mut g0 = DVector::zeros(n);
    let mut h0 = DVector::zeros(n);
    for i in 0..n {
        let (fi, gi, hi) = base.eval(u[i], data.y[i])?;
        f += fi;
        g0[i] = gi;
        h0[i] = hi;
    }
    let grad = data.x.tr_mul(&g0);
    let mut weighted_t = data.x.transpose();
    for (i, mut col) in weighted_t.column_iter_mut().enumerate() {
        col *= h0[i];
    }
    let mut hess = weighted_t * &data.x;
    // X' D X is symmetric in exact arithmetic; force it bitwise.
    linalg::symmetrize_in_place(&mut hess);
    DiffState::new(f, grad, hess)
}

/// Regression log-likelihood built by [`expand_glm_1par`].
#[derive(Debug, Clone)]
pub struct GlmTarget<B> {
    data: GlmData,
    base: B,
}

impl<B: ScalarBaseModel> GlmTarget<B> {
    pub fn new(data: GlmData, base: B) -> Self {
        GlmTarget { data, base }
    }

    pub fn data(&self) -> &GlmData {
        &self.data
    }

    pub fn base(&self) -> &B {
        &self.base
    }
}

pub type PoissonRegression = GlmTarget<PoissonLog>;

impl PoissonRegression {
    pub fn poisson(data: GlmData) -> Result<Self> {
        for &y in data.y.iter() {
            count(y)?;
        }
        Ok(GlmTarget::new(data, PoissonLog))
    }
}

impl<B: ScalarBaseModel> LogDensity for GlmTarget<B> {
    fn dim(&self) -> usize {
        self.data.ncoef()
    }

    fn eval(&self, beta: &DVector<f64>) -> Result<DiffState> {
        expand_glm_1par(beta, &self.data, &self.base)
    }
}
