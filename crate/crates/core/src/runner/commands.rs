use std::path::{Path, PathBuf};
use std::time::Instant;

use super::io::write_atomic;
use super::records::{append_record, read_log, CommandKind, Outcome, ResultRecord, RunRecord};
use super::study::subsample_study;
use crate::corpus::{synth_generate, synth_language, Corpus};
use crate::encoder::HeadMask;
use crate::error::{Error, Result};
use crate::importance::{correlation_table, rank_heads, HeadImportanceMatrix};
use crate::protocol::{
    baseline_max_prune, baseline_random_prune, corpus, label_set, merge_rankings_md, merge_rankings_sd, multi_source,
    prune_sweep, rank_pipeline, train_model, Corpora, ExperimentSpec, Heuristic, SweepRun, TrainedModel, TrainingSet,
};
use crate::runner::FORMAT_VERSION;

/// Artifact layout under one output directory.
///
/// ```text
/// corpora/<lang>.{train,dev,test}.conll, <lang>.meta.json
/// importance/<lang>.json
/// models/<spec hash>/model.ckpt, vocab.json
/// reports/
/// results.jsonl   deterministic outcomes, append-only
/// runs.jsonl      timings and artifact paths, append-only
/// ```
#[derive(Clone, Debug)]
pub struct Workspace {
    pub root: PathBuf,
    /// Re-run even when the spec hash and command are already recorded.
    pub force: bool,
}

/// What a command committed.
#[derive(Clone, Debug, PartialEq)]
pub struct Committed {
    pub result: ResultRecord,
    pub run: RunRecord,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into(), force: false }
    }

    pub fn with_force(mut self, force: bool) -> Self {
        self.force = force;
        self
    }

    pub fn results_path(&self) -> PathBuf {
        self.root.join("results.jsonl")
    }

    pub fn runs_path(&self) -> PathBuf {
        self.root.join("runs.jsonl")
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn corpora_dir(&self, spec: &ExperimentSpec) -> PathBuf {
        spec.data.corpus_dir.clone().unwrap_or_else(|| self.root.join("corpora"))
    }

    pub fn importance_path(&self, language: &str) -> PathBuf {
        self.root.join("importance").join(format!("{language}.json"))
    }

    pub fn model_dir(&self, spec: &ExperimentSpec) -> PathBuf {
        self.root.join("models").join(spec.hash())
    }

    pub fn correlation_csv_path(&self, spec: &ExperimentSpec) -> PathBuf {
        self.reports_dir().join(format!("correlation-{}.csv", spec.hash()))
    }

    pub fn results(&self) -> Result<Vec<ResultRecord>> {
        read_log(&self.results_path())
    }

    pub fn runs(&self) -> Result<Vec<RunRecord>> {
        read_log(&self.runs_path())
    }

    /// Refuses a spec hash and command pair that is already in the results
    /// log, unless forced.
    fn guard(&self, spec_hash: &str, command: CommandKind) -> Result<()> {
        if self.force {
            return Ok(());
        }
        if self.results()?.iter().any(|r| r.spec_hash == spec_hash && r.command == command) {
            return Err(Error::Validation(format!(
                "{} for spec {spec_hash} is already recorded in {}; pass --force to run it again",
                command.as_str(),
                self.results_path().display()
            )));
        }
        Ok(())
    }

    fn commit(&self, result: ResultRecord, run: RunRecord) -> Result<Committed> {
        if let Some(missing) = run.outputs.iter().find(|p| !p.exists()) {
            return Err(Error::MissingArtifact(format!("output {} was not written", missing.display())));
        }
        append_record(&self.results_path(), &result)?;
        append_record(&self.runs_path(), &run)?;
        Ok(Committed { result, run })
    }

    /// Loads every corpus the spec names from the corpus directory.
    pub fn load_corpora(&self, spec: &ExperimentSpec) -> Result<(Corpora, Vec<PathBuf>)> {
        let dir = self.corpora_dir(spec);
        let mut corpora = Corpora::new();
        let mut inputs = Vec::new();
        for lang in spec.source_languages.iter().chain(std::iter::once(&spec.target_language)) {
            if corpora.contains_key(lang) {
                continue;
            }
            let c = Corpus::load(&dir, lang)?;
            if c.task_kind != spec.task_kind {
                return Err(Error::Validation(format!(
                    "corpus {lang} is {} but the spec asks for {}",
                    c.task_kind, spec.task_kind
                )));
            }
            inputs.push(Corpus::meta_path(&dir, lang));
            corpora.insert(lang.clone(), c);
        }
        Ok((corpora, inputs))
    }

    /// One importance matrix per source language, in source order: the
    /// files listed in the spec, or the workspace defaults.
    pub fn load_importance(&self, spec: &ExperimentSpec) -> Result<(Vec<HeadImportanceMatrix>, Vec<PathBuf>)> {
        let paths: Vec<PathBuf> = if spec.data.importance.is_empty() {
            spec.source_languages.iter().map(|l| self.importance_path(l)).collect()
        } else {
            spec.data.importance.clone()
        };
        if paths.len() != spec.source_languages.len() {
            return Err(Error::Validation(format!(
                "data.importance lists {} files for {} source languages",
                paths.len(),
                spec.source_languages.len()
            )));
        }
        let mut out = Vec::new();
        for (path, lang) in paths.iter().zip(&spec.source_languages) {
            let m = HeadImportanceMatrix::load(path)?;
            if &m.language_code != lang {
                return Err(Error::Validation(format!("{} ranks {}, expected {lang}", path.display(), m.language_code)));
            }
            if (m.layers, m.heads) != (spec.model.num_layers, spec.model.num_heads) {
                return Err(Error::Validation(format!(
                    "{} is {}x{} but the model is {}x{}",
                    path.display(),
                    m.layers,
                    m.heads,
                    spec.model.num_layers,
                    spec.model.num_heads
                )));
            }
            out.push(m);
        }
        Ok((out, paths))
    }

    /// Runs one command against `spec` and commits its records.
    pub fn run(&self, command: CommandKind, spec: &ExperimentSpec) -> Result<Committed> {
        spec.validate()?;
        let hash = spec.hash();
        if command != CommandKind::Eval {
            self.guard(&hash, command)?;
        }
        let start = Instant::now();
        let mut run = RunRecord::new(&hash, command, spec.seed);
        let outcome = match command {
            CommandKind::GenData => self.gen_data(spec, &mut run)?,
            CommandKind::Train => self.train(spec, &mut run)?,
            CommandKind::Rank => self.rank(spec, &mut run)?,
            CommandKind::Correlate => self.correlate(spec, &mut run)?,
            CommandKind::Sweep | CommandKind::BaselineMax | CommandKind::BaselineRand => {
                self.single_sweep(command, spec, &mut run)?
            }
            CommandKind::MultiSource => self.multi(spec, &mut run)?,
            CommandKind::SubsampleStudy => self.study(spec, &(1..=9).collect::<Vec<_>>(), &mut run)?,
            CommandKind::Eval => self.eval(spec, &mut run)?,
        };
        run.wall_seconds = start.elapsed().as_secs_f64();
        let result = ResultRecord {
            format_version: FORMAT_VERSION.to_string(),
            spec_hash: hash,
            command,
            seed: spec.seed,
            outcome,
        };
        self.commit(result, run)
    }

    /// Subsample study over the given tenths values.
    pub fn run_subsample_study(&self, spec: &ExperimentSpec, tenths: &[usize]) -> Result<Committed> {
        spec.validate()?;
        let hash = spec.hash();
        self.guard(&hash, CommandKind::SubsampleStudy)?;
        let start = Instant::now();
        let mut run = RunRecord::new(&hash, CommandKind::SubsampleStudy, spec.seed);
        let outcome = self.study(spec, tenths, &mut run)?;
        run.wall_seconds = start.elapsed().as_secs_f64();
        let result = ResultRecord {
            format_version: FORMAT_VERSION.to_string(),
            spec_hash: hash,
            command: CommandKind::SubsampleStudy,
            seed: spec.seed,
            outcome,
        };
        self.commit(result, run)
    }

    fn gen_data(&self, spec: &ExperimentSpec, run: &mut RunRecord) -> Result<Outcome> {
        let synth = spec
            .synth
            .as_ref()
            .ok_or_else(|| Error::Validation("gen-data needs a [synth] section in the spec".into()))?;
        let mut corpora = synth_generate(&synth.languages, spec.task_kind, synth.master_seed)?;
        for control in &synth.controls {
            if corpora.iter().any(|c| c.language_code == control.profile.language_code) {
                return Err(Error::Validation(format!(
                    "synth: control language {} duplicates a language code",
                    control.profile.language_code
                )));
            }
            corpora.push(synth_language(&control.profile, spec.task_kind, control.master_seed)?);
        }
        let dir = self.corpora_dir(spec);
        for c in &corpora {
            run.outputs.extend(c.save(&dir)?);
        }
        Ok(Outcome::Corpora { languages: corpora.iter().map(|c| c.language_code.clone()).collect() })
    }

    fn train(&self, spec: &ExperimentSpec, run: &mut RunRecord) -> Result<Outcome> {
        let (corpora, inputs) = self.load_corpora(spec)?;
        run.inputs = inputs;
        let trained = self.train_for_spec(spec, &corpora)?;
        let mask = HeadMask::full(spec.model.num_layers, spec.model.num_heads);
        let eval = trained.evaluate(spec.task_kind, &mask, &corpus(&corpora, &spec.target_language)?.test, spec.train.batch_size)?;
        run.outputs = trained.save(&self.model_dir(spec))?;
        Ok(Outcome::Trained { eval })
    }

    /// Fine-tunes on the spec's training set with every head active.
    pub fn train_for_spec(&self, spec: &ExperimentSpec, corpora: &Corpora) -> Result<TrainedModel> {
        let set = TrainingSet::for_spec(spec, corpora)?;
        let langs = spec.source_languages.iter().chain(std::iter::once(&spec.target_language));
        let labels = label_set(langs.map(|l| corpus(corpora, l)).collect::<Result<Vec<_>>>()?);
        let mask = HeadMask::full(spec.model.num_layers, spec.model.num_heads);
        train_model(&spec.model, spec.seed, &set.sentences, labels, &mask, &spec.train)
    }

    fn rank(&self, spec: &ExperimentSpec, run: &mut RunRecord) -> Result<Outcome> {
        let (corpora, inputs) = self.load_corpora(spec)?;
        run.inputs = inputs;
        for lang in &spec.source_languages {
            let out = rank_pipeline(corpus(&corpora, lang)?, spec)?;
            let path = self.importance_path(lang);
            out.importance.save(&path)?;
            run.outputs.push(path);
        }
        Ok(Outcome::Importance { languages: spec.source_languages.clone() })
    }

    fn correlate(&self, spec: &ExperimentSpec, run: &mut RunRecord) -> Result<Outcome> {
        let (matrices, inputs) = self.load_importance(spec)?;
        run.inputs = inputs;
        let table = correlation_table(&matrices)?;
        let path = self.correlation_csv_path(spec);
        write_atomic(&path, table.to_csv().as_bytes())?;
        run.outputs.push(path);
        Ok(Outcome::Correlation { table })
    }

    fn one_importance(&self, spec: &ExperimentSpec, run: &mut RunRecord) -> Result<HeadImportanceMatrix> {
        if spec.source_languages.len() != 1 {
            return Err(Error::Validation(format!(
                "source_languages: this command takes one source ranking, got {}; use multi-source",
                spec.source_languages.len()
            )));
        }
        let (mut matrices, inputs) = self.load_importance(spec)?;
        run.inputs.extend(inputs);
        Ok(matrices.remove(0))
    }

    fn single_sweep(&self, command: CommandKind, spec: &ExperimentSpec, run: &mut RunRecord) -> Result<Outcome> {
        let (corpora, inputs) = self.load_corpora(spec)?;
        run.inputs = inputs;
        let out: SweepRun = match command {
            CommandKind::Sweep => {
                let m = self.one_importance(spec, run)?;
                prune_sweep(spec, &rank_heads(&m), &format!("importance({})", m.language_code), &corpora)?
            }
            CommandKind::BaselineMax => {
                let m = self.one_importance(spec, run)?;
                baseline_max_prune(spec, &m, &format!("importance({})", m.language_code), &corpora)?
            }
            _ => baseline_random_prune(spec, &corpora)?,
        };
        run.seconds_per_k.push(out.seconds_per_k);
        Ok(Outcome::Sweep { sweep: out.result })
    }

    fn multi(&self, spec: &ExperimentSpec, run: &mut RunRecord) -> Result<Outcome> {
        let (corpora, inputs) = self.load_corpora(spec)?;
        let (matrices, paths) = self.load_importance(spec)?;
        run.inputs = inputs.into_iter().chain(paths).collect();
        let (multi, runs) = multi_source(spec, &matrices, &corpora)?;
        run.seconds_per_k = runs.into_iter().map(|r| r.seconds_per_k).collect();
        Ok(Outcome::MultiSource { multi })
    }

    fn study(&self, spec: &ExperimentSpec, tenths: &[usize], run: &mut RunRecord) -> Result<Outcome> {
        let (corpora, inputs) = self.load_corpora(spec)?;
        let (matrices, paths) = self.load_importance(spec)?;
        run.inputs = inputs.into_iter().chain(paths).collect();
        let langs = matrices.iter().map(|m| m.language_code.as_str()).collect::<Vec<_>>().join("+");
        let (ranking, provenance) = match (matrices.len(), spec.heuristic) {
            (1, _) => (rank_heads(&matrices[0]), format!("importance({langs})")),
            (_, Heuristic::Md) => (merge_rankings_md(&matrices)?, format!("md({langs})")),
            (_, Heuristic::Sd) => (merge_rankings_sd(&matrices)?, format!("sd({langs})")),
            (_, Heuristic::Ec) => {
                return Err(Error::Validation("heuristic: the subsample study needs one merged ranking (md or sd)".into()))
            }
        };
        let (table, runs) = subsample_study(spec, &ranking, &provenance, &corpora, tenths)?;
        run.seconds_per_k = runs.into_iter().map(|r| r.seconds_per_k).collect();
        let path = self.reports_dir().join(format!("subsample-{}.csv", spec.hash()));
        write_atomic(&path, table.to_csv().as_bytes())?;
        run.outputs.push(path);
        Ok(Outcome::Subsample { table })
    }

    fn eval(&self, spec: &ExperimentSpec, run: &mut RunRecord) -> Result<Outcome> {
        let (corpora, inputs) = self.load_corpora(spec)?;
        let dir = self.model_dir(spec);
        let trained = TrainedModel::load(&dir)?;
        run.inputs = inputs;
        run.inputs.push(dir);
        let mask = HeadMask::full(spec.model.num_layers, spec.model.num_heads);
        let target = corpus(&corpora, &spec.target_language)?;
        Ok(Outcome::Eval { eval: trained.evaluate(spec.task_kind, &mask, &target.test, spec.train.batch_size)? })
    }
}

/// Reads a spec file and applies a seed override; the overridden spec is
/// what gets hashed.
pub fn load_spec(path: &Path, seed: Option<u64>) -> Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::load(path)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    spec.validate()?;
    Ok(spec)
}
