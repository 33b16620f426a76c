//! Seeded k-fold partition of instance indices.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub n_folds: usize,
    pub seed: u64,
    pub fold_of: Vec<u32>,
}

/// Shuffles `0..n` with `seed` and deals the permutation round-robin into `k`
/// folds, so fold sizes differ by at most one.
pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::Invalid(format!("need at least 2 folds, got {k}")));
    }
    if k > n {
        return Err(Error::Invalid(format!(
            "{k} folds requested for {n} instances"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of = vec![0u32; n];
    for (pos, &idx) in order.iter().enumerate() {
        fold_of[idx] = (pos % k) as u32;
    }
    Ok(FoldAssignment {
        n_folds: k,
        seed,
        fold_of,
    })
}

impl FoldAssignment {
    pub fn len(&self) -> usize {
        self.fold_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fold_of.is_empty()
    }

    /// Indices in `fold`, ascending.
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.fold_of[i] as usize == fold)
            .collect()
    }

    /// Indices outside `fold`, ascending.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.fold_of[i] as usize != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_folds];
        for &f in &self.fold_of {
            sizes[f as usize] += 1;
        }
        sizes
    }
}
