use super::records::{SubsamplePoint, SubsampleTable};
use crate::corpus::Split;
use crate::error::{Error, Result};
use crate::importance::HeadRanking;
use crate::protocol::{corpus, prune_sweep, Corpora, ExperimentSpec, LoaderLog, Setting, SweepRun};

/// Pruned and unpruned multi-lingual scores for each amount of target
/// training data. Every tenths value trains a fresh sweep whose k = 0 entry
/// is the unpruned score. Returns the table and one run per tenths value.
pub fn subsample_study(
    spec: &ExperimentSpec,
    ranking: &HeadRanking,
    provenance: &str,
    corpora: &Corpora,
    tenths: &[usize],
) -> Result<(SubsampleTable, Vec<SweepRun>)> {
    if spec.setting != Setting::MultiLingual {
        return Err(Error::Validation("subsample study requires setting = multi_lingual".into()));
    }
    if tenths.is_empty() {
        return Err(Error::Validation("subsample study needs at least one tenths value".into()));
    }
    if let Some(t) = tenths.iter().find(|t| !(1..=9).contains(*t)) {
        return Err(Error::Validation(format!("tenths {t} not in 1..=9")));
    }
    corpus(corpora, &spec.target_language)?;
    let mut points = Vec::new();
    let mut runs = Vec::new();
    for &t in tenths {
        let mut sub = spec.clone();
        sub.data.target_train_tenths = Some(t);
        let run = prune_sweep(&sub, ranking, provenance, corpora)?;
        points.push(SubsamplePoint {
            tenths: t,
            target_train_sentences: run.loader_log.fed(&spec.target_language, Split::Train).len(),
            unpruned: run.result.unpruned_score(),
            pruned: run.result.best_score,
            best_k: run.result.best_k,
        });
        runs.push(run);
    }
    Ok((SubsampleTable { target_language: spec.target_language.clone(), points }, runs))
}

/// Whether the target-train indices fed at each step contain those of the
/// previous step, given runs ordered by increasing tenths.
pub fn subsets_nested(target_language: &str, logs: &[&LoaderLog]) -> bool {
    logs.windows(2).all(|w| {
        w[0].fed(target_language, Split::Train).is_subset(&w[1].fed(target_language, Split::Train))
    })
}
