//! TOML run configuration.
//!
//! ```toml
//! [target]
//! kind = "poisson-simulated"   # or "mvgaussian", "poisson"
//! n = 1000
//! k = 5
//! data_seed = 1
//!
//! [sampler]
//! niter = 200
//! nnr = 20
//! seed = 1
//! partition = 10               # optional: number of contiguous subsets
//!
//! [window]                     # optional
//! nburnin = 20
//!
//! [output]                     # optional, relative to this file
//! dir = "out"
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use sns::{
    make_partition, simulate_poisson, GlmData, LogDensity, MvGaussian, PoissonRegression,
    SamplerSpec, SummaryWindow,
};

use crate::error::{CliError, Result};
use crate::io::read_matrix;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub target: TargetConfig,
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub window: WindowConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetConfig {
    /// Multivariate Gaussian with mean `mu` and precision matrix `prec` (rows).
    Mvgaussian { mu: Vec<f64>, prec: Vec<Vec<f64>> },
    /// Poisson regression on headered CSV files: `x` holds the design matrix,
    /// `y` a single column of counts.
    Poisson { x: PathBuf, y: PathBuf },
    /// Poisson regression on data simulated from the generative model.
    PoissonSimulated { n: usize, k: usize, data_seed: u64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub niter: usize,
    #[serde(default)]
    pub nnr: usize,
    #[serde(default)]
    pub seed: u64,
    /// Number of contiguous subsets; absent means no partitioning.
    pub partition: Option<usize>,
    #[serde(default = "default_true")]
    pub mh_diag: bool,
    /// Initial state; zeros when absent.
    pub x_init: Option<Vec<f64>>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub nburnin: Option<usize>,
    pub end: Option<usize>,
    pub thin: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

impl WindowConfig {
    /// Burn-in defaults to the larger of `niter / 2` and `nnr`.
    pub fn resolve(&self, niter: usize, nnr: usize) -> SummaryWindow {
        SummaryWindow {
            nburnin: self.nburnin.unwrap_or((niter / 2).max(nnr)),
            end: self.end.unwrap_or(niter),
            thin: self.thin.unwrap_or(1),
        }
    }
}

/// Everything needed to run one chain, validated.
pub struct Prepared {
    pub target: Box<dyn LogDensity>,
    pub x_init: DVector<f64>,
    pub spec: SamplerSpec,
    pub window: SummaryWindow,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| {
            CliError::config(format!("{}: {}", path.display(), e.to_string().trim_end()))
        })
    }

    /// Builds the target and validates all fields. Relative paths resolve
    /// against `base`, the directory holding the config file.
    pub fn prepare(
        &self,
        base: &Path,
        seed: Option<u64>,
        out: Option<PathBuf>,
    ) -> Result<Prepared> {
        let target = self.target.build(base)?;
        let dim = target.dim();
        let s = &self.sampler;

        let x_init = match &s.x_init {
            Some(v) if v.len() != dim => {
                return Err(CliError::config(format!(
                    "[sampler] x_init has {} entries but the target has dimension {dim}",
                    v.len()
                )))
            }
            Some(v) => DVector::from_column_slice(v),
            None => DVector::zeros(dim),
        };
        let mut spec =
            SamplerSpec::new(s.niter, s.nnr, seed.unwrap_or(s.seed)).with_mh_diag(s.mh_diag);
        if let Some(n) = s.partition {
            let p = make_partition(dim, n)
                .map_err(|e| CliError::config(format!("[sampler] partition = {n}: {e}")))?;
            spec = spec.with_partition(p);
        }
        spec.validate(dim)
            .map_err(|e| CliError::config(format!("[sampler] {e}")))?;

        let window = self.window.resolve(s.niter, s.nnr);
        window
            .validate(s.niter)
            .map_err(|e| CliError::config(format!("[window] {e}")))?;

        let out_dir = out
            .unwrap_or_else(|| base.join(self.output.dir.as_deref().unwrap_or(Path::new("out"))));
        Ok(Prepared {
            target,
            x_init,
            spec,
            window,
            out_dir,
        })
    }
}

impl TargetConfig {
    pub fn build(&self, base: &Path) -> Result<Box<dyn LogDensity>> {
        match self {
            TargetConfig::Mvgaussian { mu, prec } => {
                let k = mu.len();
                if k == 0 {
                    return Err(CliError::config("[target] mu must not be empty"));
                }
                if prec.len() != k || prec.iter().any(|r| r.len() != k) {
                    return Err(CliError::config(format!(
                        "[target] prec must be a {k}x{k} matrix to match mu"
                    )));
                }
                let p = DMatrix::from_fn(k, k, |i, j| prec[i][j]);
                let t = MvGaussian::new(DVector::from_column_slice(mu), p)
                    .map_err(|e| CliError::config(format!("[target] prec: {e}")))?;
                Ok(Box::new(t))
            }
            TargetConfig::Poisson { x, y } => {
                let (_, xm) = read_matrix(&base.join(x))?;
                let (yh, ym) = read_matrix(&base.join(y))?;
                if yh.len() != 1 {
                    return Err(CliError::config(format!(
                        "[target] y: {} must have exactly one column",
                        y.display()
                    )));
                }
                let data = GlmData::new(xm, ym.column(0).into_owned())
                    .map_err(|e| CliError::config(format!("[target] {e}")))?;
                let t = PoissonRegression::poisson(data)
                    .map_err(|e| CliError::config(format!("[target] y: {e}")))?;
                Ok(Box::new(t))
            }
            TargetConfig::PoissonSimulated { n, k, data_seed } => {
                let sim = simulate_poisson(*n, *k, *data_seed)
                    .map_err(|e| CliError::config(format!("[target] {e}")))?;
                Ok(Box::new(PoissonRegression::poisson(sim.data)?))
            }
        }
    }
}
