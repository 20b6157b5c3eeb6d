use serde::{Deserialize, Serialize};

use super::data::Corpora;
use super::spec::{ExperimentSpec, Heuristic};
use super::sweep::{prune_sweep, SweepResult, SweepRun};
use crate::error::{Error, Result};
use crate::importance::{fractional_ranks, rank_flat, HeadImportanceMatrix, HeadRanking};

fn check_same_dims(matrices: &[HeadImportanceMatrix]) -> Result<(usize, usize)> {
    let first = matrices
        .first()
        .ok_or_else(|| Error::Validation("no importance matrices to merge".into()))?;
    for m in &matrices[1..] {
        if (m.layers, m.heads) != (first.layers, first.heads) {
            return Err(Error::Validation(format!(
                "cannot merge {} ({}x{}) with {} ({}x{})",
                first.language_code, first.layers, first.heads, m.language_code, m.layers, m.heads
            )));
        }
    }
    Ok((first.layers, first.heads))
}

/// Averages each language's fractional head ranks, then ranks the average.
pub fn merge_rankings_md(matrices: &[HeadImportanceMatrix]) -> Result<HeadRanking> {
    let (l, h) = check_same_dims(matrices)?;
    let mut mean = vec![0.0; l * h];
    for m in matrices {
        for (acc, r) in mean.iter_mut().zip(fractional_ranks(&m.flat())) {
            *acc += r;
        }
    }
    mean.iter_mut().for_each(|v| *v /= matrices.len() as f64);
    Ok(rank_flat(&mean, h))
}

/// Sums the score matrices, then ranks the sum.
pub fn merge_rankings_sd(matrices: &[HeadImportanceMatrix]) -> Result<HeadRanking> {
    let (l, h) = check_same_dims(matrices)?;
    let mut sum = vec![0.0; l * h];
    for m in matrices {
        for (acc, v) in sum.iter_mut().zip(m.flat()) {
            *acc += v;
        }
    }
    Ok(rank_flat(&sum, h))
}

/// The sweep with the highest best score; ties go to the lexicographically
/// smallest language code.
pub fn select_rankings_ec(per_language: &[(String, SweepResult)]) -> Result<(String, SweepResult)> {
    let mut best: Option<&(String, SweepResult)> = None;
    for cand in per_language {
        best = match best {
            None => Some(cand),
            Some(b) if cand.1.best_score > b.1.best_score
                || (cand.1.best_score == b.1.best_score && cand.0 < b.0) =>
            {
                Some(cand)
            }
            keep => keep,
        };
    }
    best.cloned()
        .ok_or_else(|| Error::Validation("EC selection needs at least one sweep".into()))
}

/// Result of a multi-source run with its training cost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiSourceResult {
    pub heuristic: Heuristic,
    /// Language whose ranking won (EC only).
    pub selected_language: Option<String>,
    pub result: SweepResult,
    /// Every sweep run; one per source for EC, one otherwise.
    pub sweeps: Vec<(String, SweepResult)>,
    /// Total fine-tuning runs: |sources| × (limit + 1) for EC,
    /// limit + 1 for MD and SD (fewer with early stopping).
    pub trainings: usize,
}

/// Runs MD, SD or EC with one importance matrix per source language.
pub fn multi_source(
    spec: &ExperimentSpec,
    matrices: &[HeadImportanceMatrix],
    corpora: &Corpora,
) -> Result<(MultiSourceResult, Vec<SweepRun>)> {
    if matrices.len() != spec.source_languages.len() {
        return Err(Error::Validation(format!(
            "{} importance matrices for {} source languages",
            matrices.len(),
            spec.source_languages.len()
        )));
    }
    let langs = matrices.iter().map(|m| m.language_code.clone()).collect::<Vec<_>>().join("+");
    let (ranking, provenance) = match spec.heuristic {
        Heuristic::Md => (merge_rankings_md(matrices)?, format!("md({langs})")),
        Heuristic::Sd => (merge_rankings_sd(matrices)?, format!("sd({langs})")),
        Heuristic::Ec => {
            check_same_dims(matrices)?;
            let mut runs = Vec::new();
            let mut sweeps = Vec::new();
            for m in matrices {
                let run = prune_sweep(spec, &crate::importance::rank_heads(m), &format!("ec({})", m.language_code), corpora)?;
                sweeps.push((m.language_code.clone(), run.result.clone()));
                runs.push(run);
            }
            let (lang, result) = select_rankings_ec(&sweeps)?;
            let trainings = sweeps.iter().map(|s| s.1.trainings).sum();
            let out = MultiSourceResult {
                heuristic: Heuristic::Ec,
                selected_language: Some(lang),
                result,
                sweeps,
                trainings,
            };
            return Ok((out, runs));
        }
    };
    let run = prune_sweep(spec, &ranking, &provenance, corpora)?;
    let out = MultiSourceResult {
        heuristic: spec.heuristic,
        selected_language: None,
        result: run.result.clone(),
        sweeps: vec![(langs, run.result.clone())],
        trainings: run.result.trainings,
    };
    Ok((out, vec![run]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::HeadCoord;
    use crate::importance::rank_heads;

    fn m(v: &[f64]) -> HeadImportanceMatrix {
        HeadImportanceMatrix::from_scores(2, 2, v).unwrap()
    }

    #[test]
    fn identical_inputs_keep_the_single_ranking() {
        let a = m(&[0.2, 0.9, 0.0, 1.0]);
        let single = rank_heads(&a);
        assert_eq!(merge_rankings_md(&[a.clone(), a.clone()]).unwrap(), single);
        assert_eq!(merge_rankings_sd(&[a.clone(), a.clone()]).unwrap(), single);
    }

    #[test]
    fn swapped_extremes_tie_under_md() {
        let a = m(&[0.0, 0.3, 0.6, 1.0]);
        let b = m(&[1.0, 0.3, 0.6, 0.0]);
        let r = merge_rankings_md(&[a, b]).unwrap();
        // (0,0) and (1,1) both average rank 2.5 and sort after (0,1) at rank 2.
        assert_eq!(r.order, vec![HeadCoord::new(0, 1), HeadCoord::new(0, 0), HeadCoord::new(1, 1), HeadCoord::new(1, 0)]);
    }

    #[test]
    fn degenerate_matrix_does_not_change_sd() {
        let a = m(&[0.2, 0.9, 0.0, 1.0]);
        let flat = m(&[0.5; 4]);
        assert_eq!(merge_rankings_sd(&[a.clone(), flat]).unwrap(), rank_heads(&a));
    }

    #[test]
    fn md_and_sd_can_disagree() {
        // SD is dominated by b's outlier gap, MD weighs both orders equally.
        let a = m(&[0.0, 0.1, 0.2, 0.3]);
        let b = m(&[0.0, 1.0, 0.01, 0.02]);
        assert_ne!(merge_rankings_md(&[a.clone(), b.clone()]).unwrap(), merge_rankings_sd(&[a, b]).unwrap());
    }

    #[test]
    fn dimension_mismatch() {
        let a = m(&[0.0; 4]);
        let b = HeadImportanceMatrix::from_scores(1, 4, &[0.0; 4]).unwrap();
        assert!(merge_rankings_md(&[a.clone(), b.clone()]).is_err());
        assert!(merge_rankings_sd(&[a, b]).is_err());
        assert!(select_rankings_ec(&[]).is_err());
    }
}
