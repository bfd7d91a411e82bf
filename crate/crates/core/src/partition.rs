//! State-space partitions for blockwise (Gibbs-cycled) updates.
//!
//! Coordinates are zero-based.

use std::fmt;

use crate::error::{Result, SnsError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Duplicate { index: usize },
    OutOfRange { index: usize, dim: usize },
    EmptySubset { subset: usize },
    Uncovered { index: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Duplicate { index } => write!(f, "index {index} duplicated"),
            Violation::OutOfRange { index, dim } => {
                write!(f, "index {index} out of range for dimension {dim}")
            }
            Violation::EmptySubset { subset } => write!(f, "subset {subset} is empty"),
            Violation::Uncovered { index } => write!(f, "index {index} uncovered"),
        }
    }
}

/// Disjoint, nonempty subsets covering `0..dim`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    subsets: Vec<Vec<usize>>,
}

impl Partition {
    /// Validates `subsets` against dimension `dim`.
    pub fn new(subsets: Vec<Vec<usize>>, dim: usize) -> Result<Self> {
        let violations = check_partition(&subsets, dim);
        if !violations.is_empty() {
            return Err(SnsError::InvalidPartition(violations));
        }
        Ok(Partition { subsets })
    }

    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.subsets.iter().map(Vec::len).sum()
    }
}

/// Contiguous, balanced blocks; the first `dim % nsubset` blocks get one extra index.
pub fn make_partition(dim: usize, nsubset: usize) -> Result<Partition> {
    if nsubset == 0 || nsubset > dim {
        return Err(SnsError::contract(format!(
            "number of subsets must be in 1..={dim}, got {nsubset}"
        )));
    }
    let base = dim / nsubset;
    let extra = dim % nsubset;
    let mut start = 0;
    let subsets = (0..nsubset)
        .map(|s| {
            let len = base + usize::from(s < extra);
            let block: Vec<usize> = (start..start + len).collect();
            start += len;
            block
        })
        .collect();
    Ok(Partition { subsets })
}

/// Lists every way `subsets` fails to partition `0..dim`; empty means valid.
pub fn check_partition(subsets: &[Vec<usize>], dim: usize) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = vec![false; dim];
    let mut reported = vec![false; dim];
    for (s, subset) in subsets.iter().enumerate() {
        if subset.is_empty() {
            out.push(Violation::EmptySubset { subset: s });
        }
        for &index in subset {
            if index >= dim {
                out.push(Violation::OutOfRange { index, dim });
            } else if seen[index] {
                if !reported[index] {
                    out.push(Violation::Duplicate { index });
                    reported[index] = true;
                }
            } else {
                seen[index] = true;
            }
        }
    }
    out.extend(
        seen.iter()
            .enumerate()
            .filter(|(_, &s)| !s)
            .map(|(index, _)| Violation::Uncovered { index }),
    );
    out
}
