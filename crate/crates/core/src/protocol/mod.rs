//! Experiment protocol: the three-step ranking pipeline, prune sweeps under
//! the cross- and multi-lingual settings, validity baselines and
//! multi-source heuristics.

mod data;
mod multi;
mod plans;
mod spec;
mod sweep;
mod train;

pub use data::{
    build_vocab, check_hygiene, corpus, label_set, make_batches, Corpora, LoaderEntry, LoaderLog, TrainingSet,
};
pub use multi::{merge_rankings_md, merge_rankings_sd, multi_source, select_rankings_ec, MultiSourceResult};
pub use plans::{descending_order, low_rank_schedule, PlanSchedule, PrunePlan};
pub use spec::{
    ControlLanguage, DataConfig, ExperimentSpec, Heuristic, Setting, SynthConfig, TrainConfig, DEFAULT_BATCH_SIZE,
    DEFAULT_EPOCHS, DEFAULT_IMPORTANCE_BATCH_SIZE, DEFAULT_PRUNE_LIMIT, DEFAULT_RANDOM_PRUNE_SEED,
};
pub use sweep::{
    baseline_max_prune, baseline_random_prune, best_k, prune_sweep, rank_languages, rank_pipeline, run_schedule,
    KScore, RankOutput, SweepKind, SweepResult, SweepRun,
};
pub use train::{fine_tune, predict_tags, run_trial, train_model, TrainStats, TrainedModel, TrialOutcome};
