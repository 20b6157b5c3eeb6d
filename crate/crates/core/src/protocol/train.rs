use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::data::{build_vocab, make_batches};
use super::spec::TrainConfig;
use crate::autodiff::AdamState;
use crate::corpus::{LabelSet, Sentence, TaskKind, Vocab};
use crate::encoder::{checkpoint, ArchConfig, Batch, EncoderModel, HeadMask, ModelConfig};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, EvalResult};
use crate::runner::{check_format_version, write_atomic, FORMAT_VERSION};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub steps: usize,
    /// Mean loss over the batches of the last epoch.
    pub final_loss: Option<f64>,
}

/// Adam over sequential batches for `epochs` passes. Batches without a
/// labelled position are skipped.
pub fn fine_tune(
    model: &mut EncoderModel,
    batches: &[Batch],
    mask: &HeadMask,
    cfg: &TrainConfig,
) -> Result<TrainStats> {
    let names = model.param_names().to_vec();
    let mut adam = AdamState::new(cfg.learning_rate, model.params());
    let mut stats = TrainStats::default();
    for _ in 0..cfg.epochs {
        let (mut sum, mut n) = (0.0, 0);
        for batch in batches {
            let Some(loss) = model.backward_batch(batch, mask)? else {
                model.clear_grads();
                continue;
            };
            adam.step(model.params_mut(), &names)?;
            model.clear_grads();
            sum += loss;
            n += 1;
            stats.steps += 1;
        }
        stats.final_loss = (n > 0).then(|| sum / n as f64);
    }
    Ok(stats)
}

/// Predicted label strings for each sentence.
pub fn predict_tags(
    model: &EncoderModel,
    mask: &HeadMask,
    vocab: &Vocab,
    labels: &LabelSet,
    sentences: &[Sentence],
    batch_size: usize,
) -> Result<Vec<Vec<String>>> {
    let mut out = Vec::with_capacity(sentences.len());
    for batch in make_batches(sentences, vocab, labels, batch_size)? {
        for ids in model.predict(&batch, mask)? {
            out.push(ids.into_iter().map(|i| labels.label(i).to_string()).collect());
        }
    }
    Ok(out)
}

/// A trained model with the vocabulary and labels it was built for.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub model: EncoderModel,
    pub vocab: Vocab,
    pub labels: LabelSet,
    pub stats: TrainStats,
}

impl TrainedModel {
    pub fn evaluate(&self, task_kind: TaskKind, mask: &HeadMask, gold: &[Sentence], batch_size: usize) -> Result<EvalResult> {
        let pred = predict_tags(&self.model, mask, &self.vocab, &self.labels, gold, batch_size)?;
        evaluate(task_kind, gold, &pred)
    }

    fn vocab_path(dir: &Path) -> std::path::PathBuf {
        dir.join("vocab.json")
    }

    /// Writes `model.ckpt` and `vocab.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        let ckpt = dir.join("model.ckpt");
        checkpoint::save(&self.model, &ckpt)?;
        let sidecar = VocabFile {
            format_version: FORMAT_VERSION.to_string(),
            tokens: self.vocab.tokens().to_vec(),
            labels: self.labels.labels().to_vec(),
        };
        let path = Self::vocab_path(dir);
        write_atomic(&path, (serde_json::to_string(&sidecar)? + "\n").as_bytes())?;
        Ok(vec![ckpt, path])
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let model = checkpoint::load(&dir.join("model.ckpt"))?;
        let path = Self::vocab_path(dir);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let file: VocabFile = serde_json::from_str(&text)?;
        check_format_version(&file.format_version, &path)?;
        let vocab = Vocab::from_tokens(file.tokens)?;
        let labels = LabelSet::new(&file.labels.into_iter().collect());
        let cfg = model.config();
        if cfg.vocab_size != vocab.len() || cfg.num_labels != labels.len() {
            return Err(Error::Validation(format!(
                "{}: vocabulary or label count does not match the checkpoint",
                path.display()
            )));
        }
        Ok(Self { model, vocab, labels, stats: TrainStats::default() })
    }
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    format_version: String,
    tokens: Vec<String>,
    labels: Vec<String>,
}

/// Builds a fresh model from `seed` sized for `train`, applies `mask` and
/// fine-tunes it.
pub fn train_model(
    arch: &ArchConfig,
    seed: u64,
    train: &[Sentence],
    labels: LabelSet,
    mask: &HeadMask,
    cfg: &TrainConfig,
) -> Result<TrainedModel> {
    let vocab = build_vocab(train);
    let mut model = EncoderModel::new(ModelConfig::new(arch, vocab.len(), labels.len(), seed))?;
    let batches = make_batches(train, &vocab, &labels, cfg.batch_size)?;
    let stats = fine_tune(&mut model, &batches, mask, cfg)?;
    Ok(TrainedModel { model, vocab, labels, stats })
}

/// Score of one fresh train-and-evaluate run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialOutcome {
    pub eval: EvalResult,
    pub stats: TrainStats,
    pub seconds: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn run_trial(
    arch: &ArchConfig,
    seed: u64,
    task_kind: TaskKind,
    train: &[Sentence],
    labels: &LabelSet,
    test: &[Sentence],
    mask: &HeadMask,
    cfg: &TrainConfig,
) -> Result<TrialOutcome> {
    let start = Instant::now();
    let trained = train_model(arch, seed, train, labels.clone(), mask, cfg)?;
    let eval = trained.evaluate(task_kind, mask, test, cfg.batch_size)?;
    Ok(TrialOutcome { eval, stats: trained.stats, seconds: start.elapsed().as_secs_f64() })
}
