use thiserror::Error;

use crate::partition::Violation;

pub type Result<T, E = SnsError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SnsError {
    /// Cholesky of `-H` hit a non-positive pivot: the target is not log-concave here.
    #[error("Hessian is not negative-definite (Cholesky pivot {pivot} is not positive)")]
    NotNegativeDefinite { pivot: usize },

    #[error("precision matrix is not positive-definite (Cholesky pivot {pivot} is not positive)")]
    NotPositiveDefinite { pivot: usize },

    #[error("Hessian is not symmetric: h[{row}][{col}] = {upper} but h[{col}][{row}] = {lower}")]
    Asymmetric {
        row: usize,
        col: usize,
        upper: f64,
        lower: f64,
    },

    #[error("exp({u}) overflows; linear predictor magnitude must not exceed 700")]
    Overflow { u: f64 },

    #[error("{what}: expected length {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("line search failed after {halvings} halvings (f at start {f_old}, at last trial {f_trial})")]
    LineSearchFailure {
        f_old: f64,
        f_trial: f64,
        halvings: usize,
    },

    #[error("invalid partition: {}", fmt_violations(.0))]
    InvalidPartition(Vec<Violation>),

    #[error("{0}")]
    Contract(String),

    #[error("target evaluation failed: {0}")]
    Target(String),

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<SnsError>,
    },

    #[error("subset {subset}: {source}")]
    InSubset {
        subset: usize,
        #[source]
        source: Box<SnsError>,
    },
}

impl SnsError {
    pub fn contract(msg: impl Into<String>) -> Self {
        SnsError::Contract(msg.into())
    }

    pub fn at_iteration(self, iteration: usize) -> Self {
        SnsError::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }

    pub fn in_subset(self, subset: usize) -> Self {
        SnsError::InSubset {
            subset,
            source: Box::new(self),
        }
    }

    /// Strips iteration and subset context.
    pub fn root(&self) -> &SnsError {
        match self {
            SnsError::AtIteration { source, .. } | SnsError::InSubset { source, .. } => {
                source.root()
            }
            other => other,
        }
    }
}

fn fmt_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
