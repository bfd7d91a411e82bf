//! Synthetic Poisson regression data.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Result, SnsError};
use crate::model::GlmData;
use crate::sampler::chain_rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedGlm {
    pub data: GlmData,
    pub beta: DVector<f64>,
}

/// Draws `X` and `beta` uniform on (-0.5, 0.5) and `y ~ Poisson(exp(X beta))`.
///
/// `X` is filled row by row, then `beta`, then `y`, all from one stream seeded by `seed`.
pub fn simulate_poisson(n: usize, k: usize, seed: u64) -> Result<SimulatedGlm> {
    if n == 0 || k == 0 {
        return Err(SnsError::contract("simulation needs N >= 1 and K >= 1"));
    }
    let mut rng = chain_rng(seed);
    let mut unif = || rng.random_range(-0.5f64..0.5);
    let mut xs = Vec::with_capacity(n * k);
    for _ in 0..n * k {
        xs.push(unif());
    }
    let x = DMatrix::from_row_slice(n, k, &xs);
    let beta = DVector::from_iterator(k, (0..k).map(|_| unif()));
    let y = DVector::from_iterator(
        n,
        (&x * &beta).iter().map(|&u: &f64| {
            Poisson::new(u.exp())
                .expect("exp of a bounded predictor is a valid Poisson mean")
                .sample(&mut rng)
        }),
    );
    Ok(SimulatedGlm {
        data: GlmData::new(x, y)?,
        beta,
    })
}
