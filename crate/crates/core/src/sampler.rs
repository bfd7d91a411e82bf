//! Stochastic Newton Sampler transitions and the multi-iteration driver.
//!
//! Each MCMC transition proposes from the Gaussian fitted at the current state
//! and accepts with the Metropolis-Hastings rule, which needs the reverse
//! proposal density from the Gaussian fitted at the proposed state. Newton-Raphson
//! (NR) iterations instead move to the line-searched Newton point.
//!
//! Random stream usage per transition is fixed: `K` standard normals for the
//! proposal, then one uniform only if the log acceptance ratio is negative.

use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SnsError};
use crate::model::{check_len, DiffState, LogDensity};
use crate::partition::Partition;
use crate::proposal::{fit_gaussian, GaussianFit};

/// Sufficient-decrease constant of the Armijo condition.
pub const ARMIJO_C: f64 = 1e-4;
/// Maximum number of step halvings in the NR line search.
pub const MAX_HALVINGS: usize = 50;
/// Newton decrements `g'd` at or below this multiple of `eps * max(1, |f|)`
/// are treated as converged when the full step fails to improve `f`.
const ROUNDOFF_DECREMENT: f64 = 1e3;

/// The random stream used by chains.
pub type ChainRng = ChaCha8Rng;

pub fn chain_rng(seed: u64) -> ChainRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A state together with its derivatives and local Gaussian fit.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub x: DVector<f64>,
    pub state: DiffState,
    pub fit: GaussianFit,
}

impl Point {
    pub fn new<T: LogDensity + ?Sized>(target: &T, x: DVector<f64>) -> Result<Self> {
        check_len("state vector", target.dim(), x.len())?;
        let state = target.eval(&x)?;
        check_len("target gradient", x.len(), state.dim())?;
        Point::from_state(x, state)
    }

    pub fn from_state(x: DVector<f64>, state: DiffState) -> Result<Self> {
        let fit = fit_gaussian(&x, &state)?;
        Ok(Point { x, state, fit })
    }

    pub fn f(&self) -> f64 {
        self.state.f
    }
}

/// The four Metropolis-Hastings components and the decision.
///
/// `log_q` is `log q(x_old | x_prop)`, `log_q_prop` is `log q(x_prop | x_old)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MhDiag {
    pub log_p: f64,
    pub log_p_prop: f64,
    pub log_q: f64,
    pub log_q_prop: f64,
    pub accepted: bool,
}

impl MhDiag {
    pub fn log_ratio(&self) -> f64 {
        (self.log_p_prop - self.log_p) + (self.log_q - self.log_q_prop)
    }
}

/// Decides a transition. A uniform is drawn only when the log ratio is negative.
pub fn metropolis_decision<F: FnOnce() -> f64>(
    log_p: f64,
    log_p_prop: f64,
    log_q: f64,
    log_q_prop: f64,
    uniform: F,
) -> MhDiag {
    let log_r = (log_p_prop - log_p) + (log_q - log_q_prop);
    let accepted = log_r >= 0.0 || uniform() < log_r.exp();
    MhDiag {
        log_p,
        log_p_prop,
        log_q,
        log_q_prop,
        accepted,
    }
}

/// Completes a transition from an already drawn proposal.
pub fn sns_step_from_proposal<T, F>(
    target: &T,
    current: Point,
    x_prop: DVector<f64>,
    uniform: F,
) -> Result<(Point, MhDiag)>
where
    T: LogDensity + ?Sized,
    F: FnOnce() -> f64,
{
    let log_q_prop = current.fit.log_pdf(&x_prop);
    let prop = Point::new(target, x_prop)?;
    let log_q = prop.fit.log_pdf(&current.x);
    let diag = metropolis_decision(current.f(), prop.f(), log_q, log_q_prop, uniform);
    Ok(if diag.accepted {
        (prop, diag)
    } else {
        (current, diag)
    })
}

/// One MCMC transition. Returns the post-decision point, whose fit is reused
/// by the next call.
pub fn sns_step<T, R>(target: &T, current: Point, rng: &mut R) -> Result<(Point, MhDiag)>
where
    T: LogDensity + ?Sized,
    R: Rng + ?Sized,
{
    sns_transition(target, current, rng).map(|(p, t)| (p, t.diag))
}

/// An MH transition record with its proposal in the full state space.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub diag: MhDiag,
    pub x_prop: DVector<f64>,
}

fn sns_transition<T, R>(target: &T, current: Point, rng: &mut R) -> Result<(Point, Transition)>
where
    T: LogDensity + ?Sized,
    R: Rng + ?Sized,
{
    let x_prop = current.fit.sample(rng);
    let kept = x_prop.clone();
    let (next, diag) = sns_step_from_proposal(target, current, x_prop, || rng.random::<f64>())?;
    Ok((next, Transition { diag, x_prop: kept }))
}

/// One Newton-Raphson iteration with backtracking line search.
pub fn nr_step<T: LogDensity + ?Sized>(target: &T, current: Point) -> Result<Point> {
    let dir = current.fit.mean() - &current.x;
    let slope = current.state.grad.dot(&dir);
    if !(slope > 0.0) {
        // Zero gradient: already at the maximum.
        return Ok(current);
    }
    let f_old = current.f();
    let mut alpha = 1.0;
    let mut f_trial = f64::NAN;
    for halving in 0..=MAX_HALVINGS {
        let x_trial = &current.x + alpha * &dir;
        match target.eval(&x_trial) {
            Ok(ds) => {
                f_trial = ds.f;
                if ds.f >= f_old + ARMIJO_C * alpha * slope {
                    return Point::from_state(x_trial, ds);
                }
            }
            Err(SnsError::Overflow { .. }) | Err(SnsError::NonFinite(_)) => {}
            Err(e) => return Err(e),
        }
        if halving == 0 && slope <= ROUNDOFF_DECREMENT * f64::EPSILON * f_old.abs().max(1.0) {
            return Ok(current);
        }
        alpha *= 0.5;
    }
    Err(SnsError::LineSearchFailure {
        f_old,
        f_trial,
        halvings: MAX_HALVINGS,
    })
}

/// Full-space target restricted to the coordinates in `idx`, all others held at `base`.
///
/// Every evaluation runs the full-space target and slices its gradient and
/// Hessian; the most recent full evaluation is kept so the caller can commit it.
pub struct SubsetTarget<'a, T: ?Sized> {
    target: &'a T,
    base: DVector<f64>,
    idx: &'a [usize],
    last: Mutex<Option<(DVector<f64>, DiffState)>>,
}

impl<'a, T: LogDensity + ?Sized> SubsetTarget<'a, T> {
    pub fn new(target: &'a T, base: DVector<f64>, idx: &'a [usize]) -> Self {
        SubsetTarget {
            target,
            base,
            idx,
            last: Mutex::new(None),
        }
    }

    pub fn embed(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut x = self.base.clone();
        for (k, &i) in self.idx.iter().enumerate() {
            x[i] = z[k];
        }
        x
    }

    pub fn restrict(&self, x: &DVector<f64>) -> DVector<f64> {
        x.select_rows(self.idx)
    }

    pub fn slice(&self, full: &DiffState) -> DiffState {
        DiffState {
            f: full.f,
            grad: full.grad.select_rows(self.idx),
            hess: full.hess.select_rows(self.idx).select_columns(self.idx),
        }
    }

    /// Full-space derivatives at the embedding of `z`, reusing the last
    /// evaluation when it was made at the same point.
    pub fn full_state_at(&self, z: &DVector<f64>) -> Result<(DVector<f64>, DiffState)> {
        let x = self.embed(z);
        if let Some((lx, ds)) = self.last.lock().unwrap().take() {
            if lx == x {
                return Ok((x, ds));
            }
        }
        let ds = self.target.eval(&x)?;
        Ok((x, ds))
    }
}

impl<T: LogDensity + ?Sized> LogDensity for SubsetTarget<'_, T> {
    fn dim(&self) -> usize {
        self.idx.len()
    }

    fn eval(&self, z: &DVector<f64>) -> Result<DiffState> {
        check_len("subset state vector", self.idx.len(), z.len())?;
        let x = self.embed(z);
        let full = self.target.eval(&x)?;
        let sliced = self.slice(&full);
        *self.last.lock().unwrap() = Some((x, full));
        Ok(sliced)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    NewtonRaphson,
    Mcmc,
}

/// One Gibbs cycle over the subsets of `partition`, updating `x` and its
/// full-space derivatives `full` in place. Returns one transition per subset
/// in MCMC mode and none in NR mode.
pub fn step_partitioned<T, R>(
    target: &T,
    x: &mut DVector<f64>,
    full: &mut DiffState,
    partition: &Partition,
    rng: &mut R,
    mode: Mode,
) -> Result<Vec<Transition>>
where
    T: LogDensity + ?Sized,
    R: Rng + ?Sized,
{
    let mut diags = Vec::new();
    for (s, idx) in partition.subsets().iter().enumerate() {
        let sub = SubsetTarget::new(target, x.clone(), idx);
        let z = sub.restrict(x);
        let current = Point::from_state(z.clone(), sub.slice(full)).map_err(|e| e.in_subset(s))?;
        let next = match mode {
            Mode::NewtonRaphson => nr_step(&sub, current),
            Mode::Mcmc => sns_transition(&sub, current, rng).map(|(p, t)| {
                diags.push(Transition {
                    diag: t.diag,
                    x_prop: sub.embed(&t.x_prop),
                });
                p
            }),
        }
        .map_err(|e| e.in_subset(s))?;
        if next.x != z {
            let (nx, nfull) = sub.full_state_at(&next.x).map_err(|e| e.in_subset(s))?;
            *x = nx;
            *full = nfull;
        }
    }
    Ok(diags)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerSpec {
    pub niter: usize,
    pub nnr: usize,
    pub partition: Option<Partition>,
    pub seed: u64,
    pub collect_mh_diag: bool,
}

impl SamplerSpec {
    pub fn new(niter: usize, nnr: usize, seed: u64) -> Self {
        SamplerSpec {
            niter,
            nnr,
            partition: None,
            seed,
            collect_mh_diag: false,
        }
    }

    pub fn with_partition(mut self, partition: Partition) -> Self {
        self.partition = Some(partition);
        self
    }

    pub fn with_mh_diag(mut self, on: bool) -> Self {
        self.collect_mh_diag = on;
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.niter == 0 {
            return Err(SnsError::contract("niter must be positive"));
        }
        if self.nnr > self.niter {
            return Err(SnsError::contract(format!(
                "nnr ({}) must not exceed niter ({})",
                self.nnr, self.niter
            )));
        }
        if let Some(p) = &self.partition {
            Partition::new(p.subsets().to_vec(), dim)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    /// One row per iteration, post-decision state.
    pub samples: DMatrix<f64>,
    /// Log-density of each row of `samples`.
    pub lp: Vec<f64>,
    /// Acceptance flags per iteration, one per subset transition; empty for NR iterations.
    pub accepted: Vec<Vec<bool>>,
    /// Present when `spec.collect_mh_diag` is set; same layout as `accepted`.
    pub mh_diag: Option<Vec<Vec<MhDiag>>>,
    /// Full-space proposals matching `mh_diag`.
    pub proposals: Option<Vec<Vec<DVector<f64>>>>,
    pub spec: SamplerSpec,
    /// Full-space Gaussian fit at the final state.
    pub final_fit: GaussianFit,
    /// State after the last NR iteration.
    pub nr_end_state: Option<DVector<f64>>,
    /// Derivatives at `nr_end_state`.
    pub nr_end_diff: Option<DiffState>,
}

impl ChainOutput {
    pub fn niter(&self) -> usize {
        self.samples.nrows()
    }

    pub fn dim(&self) -> usize {
        self.samples.ncols()
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.samples.row(i).transpose()
    }
}

/// Runs `spec.nnr` NR iterations followed by MCMC iterations up to `spec.niter`.
pub fn run<T: LogDensity + ?Sized>(
    x_init: DVector<f64>,
    target: &T,
    spec: &SamplerSpec,
) -> Result<ChainOutput> {
    let dim = target.dim();
    check_len("initial state", dim, x_init.len())?;
    spec.validate(dim)?;
    let mut rng = chain_rng(spec.seed);
    let mut rec = Recorder::new(spec, dim);

    let final_fit = match &spec.partition {
        None => {
            let mut cur = Point::new(target, x_init).map_err(|e| e.at_iteration(0))?;
            for it in 0..spec.niter {
                let diags = if it < spec.nnr {
                    cur = nr_step(target, cur).map_err(|e| e.at_iteration(it + 1))?;
                    Vec::new()
                } else {
                    let (next, t) = sns_transition(target, cur, &mut rng)
                        .map_err(|e| e.at_iteration(it + 1))?;
                    cur = next;
                    vec![t]
                };
                rec.push(it, &cur.x, &cur.state, diags);
            }
            cur.fit
        }
        Some(partition) => {
            let mut x = x_init;
            let mut full = target.eval(&x).map_err(|e| e.at_iteration(0))?;
            for it in 0..spec.niter {
                let mode = if it < spec.nnr {
                    Mode::NewtonRaphson
                } else {
                    Mode::Mcmc
                };
                let diags = step_partitioned(target, &mut x, &mut full, partition, &mut rng, mode)
                    .map_err(|e| e.at_iteration(it + 1))?;
                rec.push(it, &x, &full, diags);
            }
            fit_gaussian(&x, &full).map_err(|e| e.at_iteration(spec.niter))?
        }
    };
    Ok(rec.finish(spec.clone(), final_fit))
}

struct Recorder {
    samples: DMatrix<f64>,
    lp: Vec<f64>,
    accepted: Vec<Vec<bool>>,
    mh_diag: Option<Vec<Vec<MhDiag>>>,
    proposals: Option<Vec<Vec<DVector<f64>>>>,
    nnr: usize,
    nr_end: Option<(DVector<f64>, DiffState)>,
}

impl Recorder {
    fn new(spec: &SamplerSpec, dim: usize) -> Self {
        Recorder {
            samples: DMatrix::zeros(spec.niter, dim),
            lp: Vec::with_capacity(spec.niter),
            accepted: Vec::with_capacity(spec.niter),
            mh_diag: spec.collect_mh_diag.then(|| Vec::with_capacity(spec.niter)),
            proposals: spec.collect_mh_diag.then(|| Vec::with_capacity(spec.niter)),
            nnr: spec.nnr,
            nr_end: None,
        }
    }

    fn push(&mut self, it: usize, x: &DVector<f64>, state: &DiffState, trans: Vec<Transition>) {
        self.samples.set_row(it, &x.transpose());
        self.lp.push(state.f);
        self.accepted
            .push(trans.iter().map(|t| t.diag.accepted).collect());
        if let Some(all) = &mut self.mh_diag {
            all.push(trans.iter().map(|t| t.diag).collect());
        }
        if let Some(all) = &mut self.proposals {
            all.push(trans.into_iter().map(|t| t.x_prop).collect());
        }
        if it + 1 == self.nnr {
            self.nr_end = Some((x.clone(), state.clone()));
        }
    }

    fn finish(self, spec: SamplerSpec, final_fit: GaussianFit) -> ChainOutput {
        let (nr_end_state, nr_end_diff) = match self.nr_end {
            Some((x, ds)) => (Some(x), Some(ds)),
            None => (None, None),
        };
        ChainOutput {
            samples: self.samples,
            lp: self.lp,
            accepted: self.accepted,
            mh_diag: self.mh_diag,
            proposals: self.proposals,
            spec,
            final_fit,
            nr_end_state,
            nr_end_diff,
        }
    }
}
