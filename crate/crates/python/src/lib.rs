//! Python bindings: targets, the sampler driver, summaries and prediction.
//!
//! Vectors cross the boundary as lists of floats and matrices as lists of
//! rows, so NumPy arrays work as inputs too.

use nalgebra::{DMatrix, DVector};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use sns::prediction::{glm_mean_response, poisson_draw};
use sns::{
    chain_rng, make_partition, simulate_poisson as sim_poisson, ChainOutput, DiffState, GlmData,
    LogDensity, Partition, PoissonLog, SamplerSpec, SummaryWindow,
};

create_exception!(
    pysns,
    SnsError,
    PyException,
    "Raised when the sampler or a target fails."
);

fn err(e: sns::SnsError) -> PyErr {
    SnsError::new_err(e.to_string())
}

fn matrix(rows: &[Vec<f64>], what: &str) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    let k = rows.first().map_or(0, Vec::len);
    if n == 0 || k == 0 || rows.iter().any(|r| r.len() != k) {
        return Err(PyValueError::new_err(format!(
            "{what} must be a non-empty rectangular matrix"
        )));
    }
    Ok(DMatrix::from_fn(n, k, |i, j| rows[i][j]))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

type Evaluation = (f64, Vec<f64>, Vec<Vec<f64>>);
type Dataset = (Vec<Vec<f64>>, Vec<f64>, Vec<f64>);

fn evaluation(ds: DiffState) -> Evaluation {
    (ds.f, ds.grad.as_slice().to_vec(), rows(&ds.hess))
}

/// Multivariate Gaussian target with mean `mu` and precision matrix `prec`.
#[pyclass(frozen)]
struct MvGaussian(sns::MvGaussian);

#[pymethods]
impl MvGaussian {
    #[new]
    fn new(mu: Vec<f64>, prec: Vec<Vec<f64>>) -> PyResult<Self> {
        let p = matrix(&prec, "prec")?;
        sns::MvGaussian::new(DVector::from_vec(mu), p)
            .map(MvGaussian)
            .map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    /// Returns `(f, grad, hess)` at `x`.
    fn eval(&self, x: Vec<f64>) -> PyResult<Evaluation> {
        self.0
            .eval(&DVector::from_vec(x))
            .map(evaluation)
            .map_err(err)
    }
}

/// Poisson regression with log link: design matrix `x` (rows are
/// observations) and counts `y`.
#[pyclass(frozen)]
struct PoissonRegression(sns::PoissonRegression);

#[pymethods]
impl PoissonRegression {
    #[new]
    fn new(x: Vec<Vec<f64>>, y: Vec<f64>) -> PyResult<Self> {
        let data = GlmData::new(matrix(&x, "x")?, DVector::from_vec(y)).map_err(err)?;
        sns::PoissonRegression::poisson(data)
            .map(PoissonRegression)
            .map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn eval(&self, x: Vec<f64>) -> PyResult<Evaluation> {
        self.0
            .eval(&DVector::from_vec(x))
            .map(evaluation)
            .map_err(err)
    }
}

/// Target defined by a Python callable `func(x) -> (f, grad, hess)`.
#[pyclass(frozen)]
struct CallableTarget {
    dim: usize,
    func: Py<PyAny>,
}

#[pymethods]
impl CallableTarget {
    #[new]
    fn new(dim: usize, func: Py<PyAny>) -> PyResult<Self> {
        if dim == 0 {
            return Err(PyValueError::new_err("dim must be positive"));
        }
        Ok(CallableTarget { dim, func })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.dim
    }
}

impl LogDensity for CallableTarget {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &DVector<f64>) -> sns::Result<DiffState> {
        let (f, g, h): Evaluation = Python::attach(|py| {
            self.func
                .bind(py)
                .call1((x.as_slice().to_vec(),))
                .and_then(|out| out.extract())
                .map_err(|e| sns::SnsError::Target(e.to_string()))
        })?;
        let k = self.dim;
        if h.len() != k || h.iter().any(|r| r.len() != k) {
            return Err(sns::SnsError::Dimension {
                what: "Hessian rows",
                expected: k,
                found: h.len(),
            });
        }
        DiffState::new(
            f,
            DVector::from_vec(g),
            DMatrix::from_fn(k, k, |i, j| h[i][j]),
        )
    }
}

fn with_target<R>(target: &Bound<'_, PyAny>, f: impl FnOnce(&dyn LogDensity) -> R) -> PyResult<R> {
    if let Ok(t) = target.cast::<MvGaussian>() {
        Ok(f(&t.get().0))
    } else if let Ok(t) = target.cast::<PoissonRegression>() {
        Ok(f(&t.get().0))
    } else if let Ok(t) = target.cast::<CallableTarget>() {
        Ok(f(t.get()))
    } else {
        Err(PyValueError::new_err(
            "target must be MvGaussian, PoissonRegression or CallableTarget",
        ))
    }
}

fn partition_arg(arg: &Bound<'_, PyAny>, dim: usize) -> PyResult<Partition> {
    if let Ok(n) = arg.extract::<usize>() {
        make_partition(dim, n).map_err(err)
    } else {
        let subsets: Vec<Vec<usize>> = arg.extract()?;
        Partition::new(subsets, dim).map_err(err)
    }
}

/// Output of `run`.
#[pyclass(frozen)]
struct Chain(ChainOutput);

fn window(
    chain: &ChainOutput,
    nburnin: Option<usize>,
    end: Option<usize>,
    thin: usize,
) -> SummaryWindow {
    let n = chain.niter();
    SummaryWindow {
        nburnin: nburnin.unwrap_or((n / 2).max(chain.spec.nnr)),
        end: end.unwrap_or(n),
        thin,
    }
}

#[pymethods]
impl Chain {
    /// One row per iteration.
    #[getter]
    fn samples(&self) -> Vec<Vec<f64>> {
        rows(&self.0.samples)
    }

    #[getter]
    fn lp(&self) -> Vec<f64> {
        self.0.lp.clone()
    }

    /// Acceptance flags per iteration, one per subset; empty for NR iterations.
    #[getter]
    fn accepted(&self) -> Vec<Vec<bool>> {
        self.0.accepted.clone()
    }

    #[getter]
    fn niter(&self) -> usize {
        self.0.niter()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    /// Summary over iterations `nburnin..end` with thinning. Burn-in defaults
    /// to the larger of half the chain and the NR iteration count.
    #[pyo3(signature = (nburnin=None, end=None, thin=1))]
    fn summary(
        &self,
        nburnin: Option<usize>,
        end: Option<usize>,
        thin: usize,
    ) -> PyResult<Summary> {
        sns::summarize(&self.0, &window(&self.0, nburnin, end, thin))
            .map(Summary)
            .map_err(err)
    }

    /// Poisson regression predictions on design matrix `x`: the mean response
    /// when `draw` is false, posterior-predictive draws otherwise. Returns one
    /// row per observation and one column per retained sample.
    #[pyo3(signature = (x, draw=false, nburnin=None, end=None, thin=1, seed=0))]
    fn predict_poisson(
        &self,
        x: Vec<Vec<f64>>,
        draw: bool,
        nburnin: Option<usize>,
        end: Option<usize>,
        thin: usize,
        seed: u64,
    ) -> PyResult<Vec<Vec<f64>>> {
        let x = matrix(&x, "x")?;
        let w = window(&self.0, nburnin, end, thin);
        let pm = if draw {
            let mut rng = chain_rng(seed);
            sns::predict_with_rng(&self.0, &w, &mut rng, |b, r| poisson_draw(&x, b, r))
        } else {
            sns::predict(&self.0, &w, |b| glm_mean_response(&PoissonLog, &x, b))
        }
        .map_err(err)?;
        Ok(rows(&pm.values))
    }
}

#[pyclass(frozen)]
struct Summary(sns::ChainSummary);

#[pymethods]
impl Summary {
    #[getter]
    fn acceptance_rate(&self) -> Option<f64> {
        self.0.acceptance_rate
    }

    #[getter]
    fn reldev_mean(&self) -> Option<f64> {
        self.0.reldev_mean
    }

    #[getter]
    fn nominal_sample_size(&self) -> usize {
        self.0.nominal_sample_size
    }

    #[getter]
    fn mean(&self) -> Vec<f64> {
        self.0.coords.iter().map(|c| c.mean).collect()
    }

    #[getter]
    fn sd(&self) -> Vec<f64> {
        self.0.coords.iter().map(|c| c.sd).collect()
    }

    #[getter]
    fn ess(&self) -> Vec<f64> {
        self.0.coords.iter().map(|c| c.ess).collect()
    }

    /// 2.5%, 50% and 97.5% quantiles per coordinate.
    #[getter]
    fn quantiles(&self) -> Vec<[f64; 3]> {
        self.0.coords.iter().map(|c| c.quantiles).collect()
    }

    #[getter]
    fn p_value(&self) -> Vec<f64> {
        self.0.coords.iter().map(|c| c.p_value).collect()
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }
}

/// Runs a chain of `niter` iterations, the first `nnr` of them Newton-Raphson.
/// `partition` is a number of contiguous subsets or a list of zero-based
/// index lists.
#[pyfunction]
#[pyo3(signature = (target, x_init, niter, nnr=0, seed=0, partition=None, mh_diag=false))]
fn run(
    target: &Bound<'_, PyAny>,
    x_init: Vec<f64>,
    niter: usize,
    nnr: usize,
    seed: u64,
    partition: Option<&Bound<'_, PyAny>>,
    mh_diag: bool,
) -> PyResult<Chain> {
    let mut spec = SamplerSpec::new(niter, nnr, seed).with_mh_diag(mh_diag);
    if let Some(p) = partition {
        spec = spec.with_partition(partition_arg(p, x_init.len())?);
    }
    let x = DVector::from_vec(x_init);
    with_target(target, |t| sns::run(x, t, &spec))?
        .map(Chain)
        .map_err(err)
}

#[pyfunction(name = "make_partition")]
fn make_partition_py(dim: usize, nsubsets: usize) -> PyResult<Vec<Vec<usize>>> {
    make_partition(dim, nsubsets)
        .map(|p| p.subsets().to_vec())
        .map_err(err)
}

/// Problems with a candidate partition, empty when it is valid.
#[pyfunction]
fn check_partition(subsets: Vec<Vec<usize>>, dim: usize) -> Vec<String> {
    sns::check_partition(&subsets, dim)
        .iter()
        .map(ToString::to_string)
        .collect()
}

#[pyfunction]
fn ess(x: Vec<f64>) -> f64 {
    sns::ess(&x)
}

#[pyfunction]
fn sample_p_value(x: Vec<f64>) -> f64 {
    sns::sample_p_value(&x)
}

/// Simulates Poisson regression data; returns `(x, y, beta)`.
#[pyfunction]
fn simulate_poisson(n: usize, k: usize, seed: u64) -> PyResult<Dataset> {
    let s = sim_poisson(n, k, seed).map_err(err)?;
    Ok((
        rows(&s.data.x),
        s.data.y.as_slice().to_vec(),
        s.beta.as_slice().to_vec(),
    ))
}

#[pymodule]
pub fn pysns(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SnsError", m.py().get_type::<SnsError>())?;
    m.add_class::<MvGaussian>()?;
    m.add_class::<PoissonRegression>()?;
    m.add_class::<CallableTarget>()?;
    m.add_class::<Chain>()?;
    m.add_class::<Summary>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(make_partition_py, m)?)?;
    m.add_function(wrap_pyfunction!(check_partition, m)?)?;
    m.add_function(wrap_pyfunction!(ess, m)?)?;
    m.add_function(wrap_pyfunction!(sample_p_value, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_poisson, m)?)?;
    Ok(())
}
