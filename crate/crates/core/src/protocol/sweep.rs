use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::data::{corpus, label_set, make_batches, Corpora, LoaderLog, TrainingSet};
use super::plans::{descending_order, low_rank_schedule, PlanSchedule};
use super::spec::{ExperimentSpec, Setting};
use super::train::{run_trial, train_model, TrainedModel};
use crate::corpus::{Corpus, TaskKind};
use crate::encoder::{HeadCoord, HeadMask};
use crate::error::{Error, Result};
use crate::importance::{accumulate_head_gradients, normalize_scores, HeadImportanceMatrix, HeadRanking};
use crate::runner::FORMAT_VERSION;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// Lowest-ranked heads first.
    LowRank,
    /// Highest-ranked heads first.
    MaxPrune,
    /// Seeded uniform draws.
    RandomPrune,
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepKind::LowRank => "low_rank",
            SweepKind::MaxPrune => "max_prune",
            SweepKind::RandomPrune => "random_prune",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KScore {
    pub k: usize,
    pub pruned: Vec<HeadCoord>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Outcome of one prune sweep. Holds no wall-clock data, so two runs of
/// the same spec serialize identically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub format_version: String,
    pub spec_hash: String,
    pub kind: SweepKind,
    pub task_kind: TaskKind,
    pub setting: Setting,
    pub source_languages: Vec<String>,
    pub target_language: String,
    /// Index `k` holds the score with `k` heads pruned; index 0 is unpruned.
    pub per_k_scores: Vec<KScore>,
    pub best_k: usize,
    pub best_score: f64,
    pub pruned_heads: Vec<HeadCoord>,
    pub ranking_provenance: String,
    pub skipped_candidates: Vec<HeadCoord>,
    pub early_stopped: bool,
    /// Fine-tuning runs spent on this result.
    pub trainings: usize,
}

impl SweepResult {
    pub fn unpruned_score(&self) -> f64 {
        self.per_k_scores[0].f1
    }
}

/// A sweep together with its per-k wall times.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRun {
    pub result: SweepResult,
    pub seconds_per_k: Vec<f64>,
    pub loader_log: LoaderLog,
}

/// Argmax over scores; ties go to the smallest k.
pub fn best_k(scores: &[f64]) -> usize {
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = k;
        }
    }
    best
}

fn check_dims(spec: &ExperimentSpec, schedule: &PlanSchedule) -> Result<()> {
    if (schedule.layers, schedule.heads) != (spec.model.num_layers, spec.model.num_heads) {
        return Err(Error::Validation(format!(
            "ranking is {}x{} but the model is {}x{}",
            schedule.layers, schedule.heads, spec.model.num_layers, spec.model.num_heads
        )));
    }
    Ok(())
}

/// Fresh fine-tuning for every k = 0..=prune_limit from the same init seed,
/// each time with the first k scheduled heads masked.
pub fn run_schedule(
    spec: &ExperimentSpec,
    schedule: &PlanSchedule,
    kind: SweepKind,
    provenance: &str,
    corpora: &Corpora,
) -> Result<SweepRun> {
    spec.validate()?;
    check_dims(spec, schedule)?;
    let train = TrainingSet::for_spec(spec, corpora)?;
    let target = corpus(corpora, &spec.target_language)?;
    let mut involved: Vec<&Corpus> = spec
        .source_languages
        .iter()
        .map(|l| corpus(corpora, l))
        .collect::<Result<_>>()?;
    involved.push(target);
    let labels = label_set(involved);
    if target.test.is_empty() {
        return Err(Error::Validation(format!("{} has an empty test split", target.language_code)));
    }

    let mut per_k = Vec::new();
    let mut seconds = Vec::new();
    let mut early_stopped = false;
    for k in 0..=spec.prune_limit {
        let plan = schedule.plan(k);
        let mask = plan.to_mask()?;
        let out = run_trial(
            &spec.model,
            spec.seed,
            spec.task_kind,
            &train.sentences,
            &labels,
            &target.test,
            &mask,
            &spec.train,
        )?;
        log::debug!("{kind} k={k} f1={:.4}", out.eval.f1);
        per_k.push(KScore {
            k,
            pruned: plan.pruned,
            precision: out.eval.precision,
            recall: out.eval.recall,
            f1: out.eval.f1,
            support: out.eval.support,
        });
        seconds.push(out.seconds);
        if spec.early_stop_on_drop && k > 0 && per_k[k].f1 < per_k[k - 1].f1 {
            early_stopped = k < spec.prune_limit;
            break;
        }
    }
    let scores: Vec<f64> = per_k.iter().map(|s| s.f1).collect();
    let best = best_k(&scores);
    let result = SweepResult {
        format_version: FORMAT_VERSION.to_string(),
        spec_hash: spec.hash(),
        kind,
        task_kind: spec.task_kind,
        setting: spec.setting,
        source_languages: spec.source_languages.clone(),
        target_language: spec.target_language.clone(),
        best_k: best,
        best_score: scores[best],
        pruned_heads: per_k[best].pruned.clone(),
        trainings: per_k.len(),
        per_k_scores: per_k,
        ranking_provenance: provenance.to_string(),
        skipped_candidates: schedule.skipped.clone(),
        early_stopped,
    };
    Ok(SweepRun { result, seconds_per_k: seconds, loader_log: train.log })
}

/// Prunes the lowest-ranked heads first.
pub fn prune_sweep(spec: &ExperimentSpec, ranking: &HeadRanking, provenance: &str, corpora: &Corpora) -> Result<SweepRun> {
    let m = &spec.model;
    let schedule = low_rank_schedule(ranking, m.num_layers, m.num_heads, spec.prune_limit)?;
    run_schedule(spec, &schedule, SweepKind::LowRank, provenance, corpora)
}

/// Prunes the highest-ranked heads first.
pub fn baseline_max_prune(
    spec: &ExperimentSpec,
    importance: &HeadImportanceMatrix,
    provenance: &str,
    corpora: &Corpora,
) -> Result<SweepRun> {
    let m = &spec.model;
    let schedule = PlanSchedule::from_order(&descending_order(importance), m.num_layers, m.num_heads, spec.prune_limit)?;
    run_schedule(spec, &schedule, SweepKind::MaxPrune, provenance, corpora)
}

/// Prunes heads drawn with `spec.random_prune_seed`.
pub fn baseline_random_prune(spec: &ExperimentSpec, corpora: &Corpora) -> Result<SweepRun> {
    let m = &spec.model;
    let schedule = PlanSchedule::random(m.num_layers, m.num_heads, spec.prune_limit, spec.random_prune_seed)?;
    let provenance = format!("random seed {}", spec.random_prune_seed);
    run_schedule(spec, &schedule, SweepKind::RandomPrune, &provenance, corpora)
}

/// Fine-tuned model plus the importance matrix computed on its dev split.
#[derive(Clone, Debug)]
pub struct RankOutput {
    pub trained: TrainedModel,
    pub importance: HeadImportanceMatrix,
    pub loader_log: LoaderLog,
}

/// Fine-tune on the language's train split, back-propagate over its dev
/// split without updates, then normalize the summed |gate gradients|.
pub fn rank_pipeline(source: &Corpus, spec: &ExperimentSpec) -> Result<RankOutput> {
    if source.dev.is_empty() {
        return Err(Error::Validation(format!("{} has no dev split", source.language_code)));
    }
    if source.train.is_empty() && spec.train.epochs > 0 {
        return Err(Error::Validation(format!("{} has no train split", source.language_code)));
    }
    let train = TrainingSet::monolingual(source);
    let mask = HeadMask::full(spec.model.num_layers, spec.model.num_heads);
    let mut trained = train_model(&spec.model, spec.seed, &train.sentences, label_set([source]), &mask, &spec.train)?;
    let dev = make_batches(&source.dev, &trained.vocab, &trained.labels, spec.train.importance_batch_size)?;
    let raw = accumulate_head_gradients(&mut trained.model, &dev, &mask)?;
    let mut importance = normalize_scores(&raw, spec.model.num_layers, spec.model.num_heads)?;
    importance.language_code = source.language_code.clone();
    importance.task_kind = source.task_kind;
    importance.model_config_hash = trained.model.config().hash();
    importance.dev_sentence_count = source.dev.len();
    importance.seed = spec.seed;
    importance.provenance = BTreeMap::from([
        ("epochs".to_string(), spec.train.epochs.to_string()),
        ("learning_rate".to_string(), spec.train.learning_rate.to_string()),
        ("batch_size".to_string(), spec.train.batch_size.to_string()),
        ("importance_batch_size".to_string(), spec.train.importance_batch_size.to_string()),
        ("train_sentences".to_string(), source.train.len().to_string()),
        ("untrained".to_string(), (spec.train.epochs == 0).to_string()),
        (
            "raw_sum".to_string(),
            format!("{:e}", raw.iter().sum::<f64>()),
        ),
    ]);
    Ok(RankOutput { trained, importance, loader_log: train.log })
}

/// [`rank_pipeline`] for every language present in `corpora`, keyed by code.
pub fn rank_languages(languages: &[String], spec: &ExperimentSpec, corpora: &Corpora) -> Result<Vec<HeadImportanceMatrix>> {
    languages
        .iter()
        .map(|l| Ok(rank_pipeline(corpus(corpora, l)?, spec)?.importance))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn best_k_prefers_smallest_on_ties() {
        assert_eq!(best_k(&[0.5, 0.7, 0.7, 0.6]), 1);
        assert_eq!(best_k(&[0.5]), 0);
        assert_eq!(best_k(&[0.5, 0.5]), 0);
    }
}
