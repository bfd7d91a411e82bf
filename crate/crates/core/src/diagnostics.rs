//! Chain summaries: windowing, per-coordinate statistics, effective sample
//! size, empirical p-values, acceptance rate and the deviation of the target
//! from its quadratic approximation at the mode.

use std::fmt;

use nalgebra::DVector;

use crate::error::{Result, SnsError};
use crate::model::{DiffState, LogDensity};
use crate::sampler::ChainOutput;

/// Burn-in, end and thinning applied before summarizing. Iterations are
/// counted from 1; rows `nburnin+1, nburnin+1+thin, ... <= end` are retained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SummaryWindow {
    pub nburnin: usize,
    pub end: usize,
    pub thin: usize,
}

impl SummaryWindow {
    /// Discards the first half as burn-in.
    pub fn default_for(niter: usize) -> Self {
        SummaryWindow {
            nburnin: niter / 2,
            end: niter,
            thin: 1,
        }
    }

    pub fn validate(&self, niter: usize) -> Result<()> {
        if self.thin == 0 {
            return Err(SnsError::contract("thin must be positive"));
        }
        if self.end > niter {
            return Err(SnsError::contract(format!(
                "end ({}) exceeds the number of iterations ({niter})",
                self.end
            )));
        }
        if self.nburnin >= self.end {
            return Err(SnsError::contract(format!(
                "window is empty: nburnin ({}) must be below end ({})",
                self.nburnin, self.end
            )));
        }
        Ok(())
    }

    /// Zero-based indices of the retained rows.
    pub fn rows(&self) -> impl Iterator<Item = usize> {
        (self.nburnin..self.end).step_by(self.thin.max(1))
    }

    pub fn len(&self) -> usize {
        if self.end <= self.nburnin || self.thin == 0 {
            0
        } else {
            (self.end - self.nburnin).div_ceil(self.thin)
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (denominator `n - 1`); zero for fewer than two
/// draws or a constant series.
pub fn sd(x: &[f64]) -> f64 {
    if x.len() < 2 || x.iter().all(|&v| v == x[0]) {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

/// Quantile by linear interpolation between order statistics (`(n-1)p` rule).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantiles(x: &[f64], probs: &[f64]) -> Vec<f64> {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    probs.iter().map(|&p| quantile_sorted(&s, p)).collect()
}

/// Yule-Walker autoregressive fit with order chosen by AIC.
#[derive(Debug, Clone, PartialEq)]
pub struct ArFit {
    pub coefficients: Vec<f64>,
    /// Innovation variance, with the `n / (n - order - 1)` degrees-of-freedom correction.
    pub var_pred: f64,
}

impl ArFit {
    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    /// Spectral density at frequency zero: `var_pred / (1 - sum(ar))^2`.
    pub fn spectrum0(&self) -> f64 {
        let s: f64 = self.coefficients.iter().sum();
        self.var_pred / (1.0 - s).powi(2)
    }
}

/// Fits AR models of order `0..=min(n-1, 10 log10 n)` by Levinson-Durbin on the
/// demeaned series and keeps the one with smallest AIC.
pub fn ar_yule_walker(x: &[f64]) -> ArFit {
    let n = x.len();
    let m = mean(x);
    let max_order = ((10.0 * (n as f64).log10()).floor() as usize).min(n.saturating_sub(1));
    let acov: Vec<f64> = (0..=max_order)
        .map(|lag| {
            (0..n - lag)
                .map(|t| (x[t] - m) * (x[t + lag] - m))
                .sum::<f64>()
                / n as f64
        })
        .collect();

    let mut best_aic = f64::INFINITY;
    let mut best = (Vec::new(), acov[0]);
    let mut phi: Vec<f64> = Vec::new();
    let mut v = acov[0];
    for order in 0..=max_order {
        if order > 0 {
            let num = acov[order]
                - (0..order - 1)
                    .map(|j| phi[j] * acov[order - 1 - j])
                    .sum::<f64>();
            let kappa = num / v;
            let prev = phi.clone();
            phi.push(kappa);
            for j in 0..order - 1 {
                phi[j] = prev[j] - kappa * prev[order - 2 - j];
            }
            v *= 1.0 - kappa * kappa;
        }
        if !(v > 0.0) {
            break;
        }
        let aic = n as f64 * v.ln() + 2.0 * order as f64;
        if aic < best_aic {
            best_aic = aic;
            best = (phi.clone(), v);
        }
    }
    let (coefficients, v) = best;
    let order = coefficients.len();
    let var_pred = v * n as f64 / (n - (order + 1)) as f64;
    ArFit {
        coefficients,
        var_pred,
    }
}

/// Effective sample size from the AR spectral density at zero, clamped to `(0, n]`.
/// A constant series has `ess = n`.
pub fn ess(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return n as f64;
    }
    let var = sd(x).powi(2);
    let scale = x
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    if var.sqrt() <= 1e-12 * scale || var == 0.0 {
        return n as f64;
    }
    let spec = ar_yule_walker(x).spectrum0();
    let e = n as f64 * var / spec;
    if e.is_finite() {
        e.clamp(f64::MIN_POSITIVE, n as f64)
    } else {
        n as f64
    }
}

/// Two-sided empirical tail mass of zero.
pub fn sample_p_value(x: &[f64]) -> f64 {
    let pos = x.iter().filter(|&&v| v > 0.0).count();
    let neg = x.iter().filter(|&&v| v < 0.0).count();
    (2.0 * pos.min(neg) as f64 / x.len() as f64).min(1.0)
}

/// Significance code for a p-value: `***` < 0.001, `**` < 0.01, `*` < 0.05, `.` < 0.1.
pub fn signif_stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else if p < 0.1 {
        "."
    } else {
        ""
    }
}

pub const SUMMARY_PROBS: [f64; 3] = [0.025, 0.5, 0.975];

#[derive(Debug, Clone, PartialEq)]
pub struct CoordStats {
    pub mean: f64,
    pub sd: f64,
    pub ess: f64,
    /// 2.5%, 50% and 97.5% quantiles.
    pub quantiles: [f64; 3],
    pub p_value: f64,
}

impl CoordStats {
    pub fn of(x: &[f64]) -> Self {
        let q = quantiles(x, &SUMMARY_PROBS);
        CoordStats {
            mean: mean(x),
            sd: sd(x),
            ess: ess(x),
            quantiles: [q[0], q[1], q[2]],
            p_value: sample_p_value(x),
        }
    }
}

/// Min, quartiles, mean and max of a set of values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiveNum {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub mean: f64,
    pub q3: f64,
    pub max: f64,
}

impl FiveNum {
    pub fn of(x: &[f64]) -> Self {
        let q = quantiles(x, &[0.0, 0.25, 0.5, 0.75, 1.0]);
        FiveNum {
            min: q[0],
            q1: q[1],
            median: q[2],
            mean: mean(x),
            q3: q[3],
            max: q[4],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSummary {
    pub dim: usize,
    pub niter: usize,
    pub nnr: usize,
    pub nsubsets: Option<usize>,
    pub window: SummaryWindow,
    pub nominal_sample_size: usize,
    /// `None` when the window holds no MCMC transitions.
    pub acceptance_rate: Option<f64>,
    pub reldev_mean: Option<f64>,
    pub coords: Vec<CoordStats>,
    pub ess_summary: FiveNum,
}

/// Retained rows of coordinate `j`.
pub fn column(chain: &ChainOutput, window: &SummaryWindow, j: usize) -> Vec<f64> {
    window.rows().map(|i| chain.samples[(i, j)]).collect()
}

/// Accepted over total MH transitions in iterations `nburnin+1..=end`, each
/// subset transition counted separately.
pub fn acceptance_rate(chain: &ChainOutput, window: &SummaryWindow) -> Option<f64> {
    let flags = chain.accepted[window.nburnin..window.end].iter().flatten();
    let (acc, total) = flags.fold((0usize, 0usize), |(a, t), &f| (a + usize::from(f), t + 1));
    (total > 0).then(|| acc as f64 / total as f64)
}

/// Proposals whose quadratic-approximation change falls below this are skipped.
pub const RELDEV_MIN_DENOM: f64 = 1e-12;

/// Relative deviation `(df - dq) / dq` of the log-density change `df` from its
/// quadratic approximation `dq`, both measured from the reference state.
pub fn relative_deviation(
    reference: &DiffState,
    x_ref: &DVector<f64>,
    x: &DVector<f64>,
    f: f64,
) -> Option<f64> {
    let d = x - x_ref;
    let dq = reference.grad.dot(&d) + 0.5 * d.dot(&(&reference.hess * &d));
    if dq.abs() < RELDEV_MIN_DENOM {
        return None;
    }
    Some((f - reference.f - dq) / dq)
}

fn reldev_from(
    chain: &ChainOutput,
    window: &SummaryWindow,
    x_hat: &DVector<f64>,
    reference: &DiffState,
) -> Option<f64> {
    let (diags, props) = (chain.mh_diag.as_ref()?, chain.proposals.as_ref()?);
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in window.rows() {
        for (d, x) in diags[i].iter().zip(&props[i]) {
            if let Some(r) = relative_deviation(reference, x_hat, x, d.log_p_prop) {
                sum += r;
                count += 1;
            }
        }
    }
    (count > 0).then(|| sum / count as f64)
}

/// Mean relative deviation of the log-density from its quadratic
/// approximation, over the MH proposals of the retained iterations. The
/// approximation is built at the state reached by the last NR iteration,
/// which stands in for the mode. Needs a chain run with MH diagnostics.
/// Returns `Ok(None)` if every proposal sits at that state.
pub fn reldev_mean<T: LogDensity + ?Sized>(
    chain: &ChainOutput,
    target: &T,
    window: &SummaryWindow,
) -> Result<Option<f64>> {
    window.validate(chain.niter())?;
    let x_hat = chain.nr_end_state.as_ref().ok_or_else(|| {
        SnsError::contract(
            "reldev requires at least one NR iteration: the NR end state stands in for the mode",
        )
    })?;
    if chain.mh_diag.is_none() || chain.proposals.is_none() {
        return Err(SnsError::contract(
            "reldev requires a chain run with MH diagnostics collected",
        ));
    }
    let reference = target.eval(x_hat)?;
    Ok(reldev_from(chain, window, x_hat, &reference))
}

/// Summarizes the retained rows. `reldev_mean` is filled when the chain
/// collected MH diagnostics and ran at least one NR iteration.
pub fn summarize(chain: &ChainOutput, window: &SummaryWindow) -> Result<ChainSummary> {
    window.validate(chain.niter())?;
    let coords: Vec<CoordStats> = (0..chain.dim())
        .map(|j| CoordStats::of(&column(chain, window, j)))
        .collect();
    let ess_values: Vec<f64> = coords.iter().map(|c| c.ess).collect();
    let reldev = match (&chain.nr_end_state, &chain.nr_end_diff) {
        (Some(x), Some(ds)) => reldev_from(chain, window, x, ds),
        _ => None,
    };
    Ok(ChainSummary {
        dim: chain.dim(),
        niter: chain.niter(),
        nnr: chain.spec.nnr,
        nsubsets: chain.spec.partition.as_ref().map(|p| p.len()),
        window: *window,
        nominal_sample_size: window.len(),
        acceptance_rate: acceptance_rate(chain, window),
        reldev_mean: reldev,
        coords,
        ess_summary: FiveNum::of(&ess_values),
    })
}

impl fmt::Display for ChainSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Stochastic Newton Sampler (SNS)")?;
        writeln!(f, "state space dimensionality: {}", self.dim)?;
        if let Some(n) = self.nsubsets {
            writeln!(f, "state space partitioning: {n} subsets")?;
        }
        writeln!(f, "total iterations: {}", self.niter)?;
        writeln!(f, "\tNR iterations: {}", self.nnr)?;
        writeln!(f, "\tburn-in iterations: {}", self.window.nburnin)?;
        writeln!(f, "\tend iteration: {}", self.window.end)?;
        writeln!(f, "\tthinning interval: {}", self.window.thin)?;
        writeln!(
            f,
            "\tsampling iterations (before thinning): {}",
            self.window.end - self.window.nburnin
        )?;
        match self.acceptance_rate {
            Some(a) => writeln!(f, "acceptance rate: {a:.4}")?,
            None => writeln!(f, "acceptance rate: NA")?,
        }
        if let Some(r) = self.reldev_mean {
            writeln!(
                f,
                "\tmean relative deviation from quadratic approx: {r:.3e}"
            )?;
        }
        writeln!(f, "sample statistics:")?;
        writeln!(f, "\t(nominal sample size: {})", self.nominal_sample_size)?;
        write_stats_table(f, &self.coords)?;
        writeln!(f, "---")?;
        writeln!(
            f,
            "Signif. codes:  0 '***' 0.001 '**' 0.01 '*' 0.05 '.' 0.1 ' ' 1"
        )?;
        writeln!(f, "summary of ess:")?;
        let e = &self.ess_summary;
        writeln!(
            f,
            "{:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
            "Min.", "1st Qu.", "Median", "Mean", "3rd Qu.", "Max."
        )?;
        writeln!(
            f,
            "{:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            e.min, e.q1, e.median, e.mean, e.q3, e.max
        )
    }
}

pub(crate) fn write_stats_table(f: &mut fmt::Formatter<'_>, rows: &[CoordStats]) -> fmt::Result {
    writeln!(
        f,
        "{:>6} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12} {:>7}",
        "", "mean", "sd", "ess", "2.5%", "50%", "97.5%", "p-val"
    )?;
    for (i, c) in rows.iter().enumerate() {
        writeln!(
            f,
            "{:>6} {:>12.6} {:>12.6} {:>12.4} {:>12.6} {:>12.6} {:>12.6} {:>7.3} {}",
            i + 1,
            c.mean,
            c.sd,
            c.ess,
            c.quantiles[0],
            c.quantiles[1],
            c.quantiles[2],
            c.p_value,
            signif_stars(c.p_value)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn window_defaults_and_rows() {
        let w = SummaryWindow::default_for(501);
        assert_eq!((w.nburnin, w.end, w.thin), (250, 501, 1));
        let w = SummaryWindow {
            nburnin: 3,
            end: 10,
            thin: 3,
        };
        assert_eq!(w.rows().collect::<Vec<_>>(), vec![3, 6, 9]);
        assert_eq!(w.len(), 3);
        assert!(SummaryWindow {
            nburnin: 5,
            end: 5,
            thin: 1
        }
        .validate(10)
        .is_err());
        assert!(SummaryWindow {
            nburnin: 0,
            end: 11,
            thin: 1
        }
        .validate(10)
        .is_err());
        assert!(SummaryWindow {
            nburnin: 0,
            end: 10,
            thin: 0
        }
        .validate(10)
        .is_err());
    }

    #[test]
    fn p_values() {
        assert_eq!(sample_p_value(&[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(sample_p_value(&[1.0, -1.0, 2.0, -2.0]), 1.0);
        let mut x = vec![1.0; 96];
        x.extend([-1.0; 4]);
        assert_relative_eq!(sample_p_value(&x), 0.08, epsilon = 1e-15);
        assert_eq!(signif_stars(0.08), ".");
        assert_eq!(signif_stars(0.0), "***");
        assert_eq!(signif_stars(0.04), "*");
        assert_eq!(signif_stars(0.5), "");
    }

    #[test]
    fn type7_quantiles() {
        let x = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(quantiles(&x, &[0.0, 0.5, 1.0]), vec![1.0, 2.5, 4.0]);
        assert_relative_eq!(quantiles(&x, &[0.25])[0], 1.75);
        assert_eq!(quantiles(&[7.0], &[0.025, 0.975]), vec![7.0, 7.0]);
    }

    #[test]
    fn constant_series() {
        let x = vec![2.5; 40];
        let s = CoordStats::of(&x);
        assert_eq!(s.sd, 0.0);
        assert_eq!(s.ess, 40.0);
        assert_eq!(s.quantiles, [2.5; 3]);
    }

    #[test]
    fn levinson_durbin_matches_direct_yule_walker_solve() {
        let x: Vec<f64> = (0..200)
            .map(|i| ((i as f64) * 0.37).sin() + 0.1 * ((i * i % 17) as f64))
            .collect();
        let fit = ar_yule_walker(&x);
        let p = fit.order();
        assert!(p >= 1);
        let n = x.len();
        let m = mean(&x);
        let r: Vec<f64> = (0..=p)
            .map(|l| (0..n - l).map(|t| (x[t] - m) * (x[t + l] - m)).sum::<f64>() / n as f64)
            .collect();
        let toeplitz = nalgebra::DMatrix::from_fn(p, p, |i, j| r[i.abs_diff(j)]);
        let rhs = nalgebra::DVector::from_fn(p, |i, _| r[i + 1]);
        let phi = toeplitz.lu().solve(&rhs).unwrap();
        for j in 0..p {
            assert_relative_eq!(fit.coefficients[j], phi[j], epsilon = 1e-9);
        }
    }
}
