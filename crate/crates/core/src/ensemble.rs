//! Seed derivation for disorder ensembles and a deterministic parallel
//! map-reduce.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// SplitMix64 finaliser; a bijection on `u64`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `n_realizations` disorder seeds derived from `base_seed`.
///
/// Realisation `i` uses `splitmix64(base_seed + i)`. The map is injective, so
/// seeds within one plan never collide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsemblePlan {
    pub base_seed: u64,
    pub n_realizations: usize,
}

impl EnsemblePlan {
    pub fn new(base_seed: u64, n_realizations: usize) -> Result<Self> {
        if n_realizations == 0 {
            return Err(Error::EmptyEnsemble);
        }
        Ok(Self {
            base_seed,
            n_realizations,
        })
    }

    pub fn seed(&self, index: usize) -> u64 {
        splitmix64(self.base_seed.wrapping_add(index as u64))
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.n_realizations).map(|i| self.seed(i))
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.n_realizations == 0 {
            Err(Error::EmptyEnsemble)
        } else {
            Ok(())
        }
    }
}

/// Tasks evaluated in parallel per batch before the ordered fold.
const BATCH: usize = 64;

/// Evaluates `map(i)` for `i in 0..n` on the current rayon pool and folds the
/// results strictly in index order, so the outcome does not depend on the
/// number of worker threads.
pub fn ordered_map_fold<T, A, M, F>(n: usize, map: M, init: A, mut fold: F) -> A
where
    T: Send,
    M: Fn(usize) -> T + Sync,
    F: FnMut(A, T) -> A,
{
    let mut acc = init;
    let mut start = 0;
    while start < n {
        let end = (start + BATCH).min(n);
        let batch: Vec<T> = (start..end).into_par_iter().map(&map).collect();
        for item in batch {
            acc = fold(acc, item);
        }
        start = end;
    }
    acc
}
