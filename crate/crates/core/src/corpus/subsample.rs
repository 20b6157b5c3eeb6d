use rand::seq::SliceRandom;

use super::Corpus;
use crate::error::{Error, Result};
use crate::seed;

/// Number of disjoint training subsets.
pub const SUBSETS: usize = 10;

/// Seeded partition of `0..n` into [`SUBSETS`] near-equal disjoint subsets.
/// Each subset is sorted; the first `n % 10` subsets hold one extra index.
pub fn partition_indices(n: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng_for(seed, "subsample-partition"));
    let base = n / SUBSETS;
    let extra = n % SUBSETS;
    let mut out = Vec::with_capacity(SUBSETS);
    let mut start = 0;
    for i in 0..SUBSETS {
        let len = base + usize::from(i < extra);
        let mut part = order[start..start + len].to_vec();
        part.sort_unstable();
        out.push(part);
        start += len;
    }
    out
}

/// Training indices kept by [`subsample_train`], in the order they are fed.
pub fn subsample_indices(n: usize, tenths: usize, seed: u64) -> Result<Vec<usize>> {
    if !(1..SUBSETS).contains(&tenths) {
        return Err(Error::Validation(format!(
            "tenths must be in 1..=9, got {tenths} (0 and 10 are the cross- and multi-lingual settings)"
        )));
    }
    if n < SUBSETS {
        return Err(Error::Validation(format!(
            "training split has {n} sentences, need at least {SUBSETS}"
        )));
    }
    Ok(partition_indices(n, seed)
        .into_iter()
        .take(tenths)
        .flatten()
        .collect())
}

/// Keeps the first `tenths` of ten seeded disjoint subsets of the training
/// split. Dev and test are untouched; `tenths = k` is a subset of `k + 1`.
pub fn subsample_train(corpus: &Corpus, tenths: usize, seed: u64) -> Result<Corpus> {
    let keep = subsample_indices(corpus.train.len(), tenths, seed)?;
    let mut out = corpus.clone();
    out.train = keep.iter().map(|&i| corpus.train[i].clone()).collect();
    Ok(out)
}
