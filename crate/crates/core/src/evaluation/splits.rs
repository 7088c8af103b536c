//! Cross-validation splitters: shuffled k-fold and forward-chaining.
//!
//! Shuffled k-fold mirrors the usual tuning procedure but leaks future rows
//! into training folds on time-series data; prefer [`forward_chain_splits`]
//! when that matters.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A list of `(train indices, validation indices)` pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvSplit {
    pub folds: Vec<(Vec<usize>, Vec<usize>)>,
}

impl CvSplit {
    pub fn k(&self) -> usize {
        self.folds.len()
    }
}

/// Plain k-fold: validation folds of size `⌈n/k⌉` or `⌊n/k⌋` partition
/// `0..n`. With `shuffle`, indices are permuted by a seeded RNG first.
pub fn kfold_splits(n: usize, k: usize, seed: u64, shuffle: bool) -> Result<CvSplit> {
    if k < 2 || k > n {
        return Err(Error::InvalidFolds { k, n });
    }
    let mut indices: Vec<usize> = (0..n).collect();
    if shuffle {
        indices.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let base = n / k;
    let extra = n % k; // the first `extra` folds get one more element
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for j in 0..k {
        let size = base + usize::from(j < extra);
        let val: Vec<usize> = indices[start..start + size].to_vec();
        let train: Vec<usize> = indices[..start]
            .iter()
            .chain(&indices[start + size..])
            .copied()
            .collect();
        folds.push((train, val));
        start += size;
    }
    Ok(CvSplit { folds })
}

/// Forward-chaining split: fold `j` trains on the prefix `[0, b_j)` and
/// validates on `[b_j, b_{j+1})`, with boundaries spaced evenly over
/// `[min_train, n)`. Every validation index exceeds every train index of
/// its fold, so no future data leaks backwards.
pub fn forward_chain_splits(n: usize, k: usize, min_train: usize) -> Result<CvSplit> {
    if k == 0 || min_train == 0 || min_train + k > n {
        return Err(Error::InfeasibleChain { min_train, k, n });
    }
    let span = n - min_train;
    let mut folds = Vec::with_capacity(k);
    for j in 0..k {
        // integer boundaries that exactly cover [min_train, n)
        let b_lo = min_train + span * j / k;
        let b_hi = min_train + span * (j + 1) / k;
        let train: Vec<usize> = (0..b_lo).collect();
        let val: Vec<usize> = (b_lo..b_hi).collect();
        folds.push((train, val));
    }
    Ok(CvSplit { folds })
}
