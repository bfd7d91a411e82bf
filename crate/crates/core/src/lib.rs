//! Stochastic Newton Sampler.
//!
//! Metropolis-Hastings sampling of twice-differentiable, log-concave densities
//! using a proposal fitted from the local gradient and Hessian: the Gaussian
//! whose mean is the Newton step and whose precision is the negative Hessian.
//! Also provided are Newton-Raphson burn-in with line search, blockwise
//! sampling over a state-space partition, chain diagnostics and sample-based
//! prediction.
//!
//! ```
//! use nalgebra::{DMatrix, DVector};
//! use sns::{run, summarize, MvGaussian, SamplerSpec, SummaryWindow};
//!
//! let target = MvGaussian::new(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
//! let spec = SamplerSpec::new(200, 5, 42).with_mh_diag(true);
//! let chain = run(DVector::from_vec(vec![3.0, -3.0]), &target, &spec).unwrap();
//! let summary = summarize(&chain, &SummaryWindow::default_for(200)).unwrap();
//! assert_eq!(summary.acceptance_rate, Some(1.0));
//! ```

// `!(x > 0.0)` is deliberate: NaN must fail these checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod model;
pub mod partition;
pub mod prediction;
pub mod proposal;
pub mod sampler;
pub mod simulate;

pub use diagnostics::{
    ess, reldev_mean, sample_p_value, summarize, ChainSummary, CoordStats, SummaryWindow,
};
pub use error::{Result, SnsError};
pub use model::{
    expand_glm_1par, poisson_base, DiffState, GlmData, GlmTarget, LogDensity, MvGaussian,
    PoissonLog, PoissonRegression, ScalarBaseModel,
};
pub use partition::{check_partition, make_partition, Partition, Violation};
pub use prediction::{
    predict, predict_with_rng, summarize_prediction, PredictionKind, PredictionMatrix,
};
pub use proposal::{fit_gaussian, GaussianFit};
pub use sampler::{
    chain_rng, nr_step, run, sns_step, step_partitioned, ChainOutput, MhDiag, Mode, Point,
    SamplerSpec, Transition,
};
pub use simulate::{simulate_poisson, SimulatedGlm};
