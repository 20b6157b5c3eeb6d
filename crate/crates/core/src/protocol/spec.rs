use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::autodiff::DEFAULT_LEARNING_RATE;
use crate::corpus::{LanguageProfile, TaskKind};
use crate::encoder::{ArchConfig, ModelConfig};
use crate::error::{Error, Result};
use crate::seed;

pub const DEFAULT_PRUNE_LIMIT: usize = 12;
pub const DEFAULT_EPOCHS: usize = 3;
pub const DEFAULT_BATCH_SIZE: usize = 16;
pub const DEFAULT_IMPORTANCE_BATCH_SIZE: usize = 1;
pub const DEFAULT_RANDOM_PRUNE_SEED: u64 = 42;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    /// Train on source languages only, test on the target.
    CrossLingual,
    /// Train on source and target training sets, test on the target.
    MultiLingual,
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Setting::CrossLingual => "cross_lingual",
            Setting::MultiLingual => "multi_lingual",
        })
    }
}

/// How several source-language importance matrices become a ranking.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Heuristic {
    /// Average of per-language fractional ranks.
    #[default]
    Md,
    /// Sum of per-language scores.
    Sd,
    /// One sweep per language, keep the best.
    Ec,
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Heuristic::Md => "md",
            Heuristic::Sd => "sd",
            Heuristic::Ec => "ec",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    /// Sentences per backward pass when accumulating gate gradients on dev.
    /// Smaller batches give more |gradient| samples and a steadier ranking.
    #[serde(default = "default_importance_batch")]
    pub importance_batch_size: usize,
}

fn default_epochs() -> usize {
    DEFAULT_EPOCHS
}
fn default_lr() -> f64 {
    DEFAULT_LEARNING_RATE
}
fn default_batch() -> usize {
    DEFAULT_BATCH_SIZE
}
fn default_importance_batch() -> usize {
    DEFAULT_IMPORTANCE_BATCH_SIZE
}
fn default_prune_limit() -> usize {
    DEFAULT_PRUNE_LIMIT
}
fn default_random_seed() -> u64 {
    DEFAULT_RANDOM_PRUNE_SEED
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: DEFAULT_EPOCHS,
            learning_rate: DEFAULT_LEARNING_RATE,
            batch_size: DEFAULT_BATCH_SIZE,
            importance_batch_size: DEFAULT_IMPORTANCE_BATCH_SIZE,
        }
    }
}

/// Where corpora and precomputed rankings live.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Directory holding `<lang>.{train,dev,test}.conll` and metadata.
    #[serde(default)]
    pub corpus_dir: Option<PathBuf>,
    /// Importance files, one per source language, in source order.
    #[serde(default)]
    pub importance: Vec<PathBuf>,
    /// Multi-lingual only: keep this many tenths of the target train split.
    #[serde(default)]
    pub target_train_tenths: Option<usize>,
    #[serde(default)]
    pub subsample_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlLanguage {
    pub master_seed: u64,
    pub profile: LanguageProfile,
}

/// Input to `gen-data`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub master_seed: u64,
    pub languages: Vec<LanguageProfile>,
    /// Languages rendered from their own, unrelated grammar.
    #[serde(default)]
    pub controls: Vec<ControlLanguage>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub task_kind: TaskKind,
    pub source_languages: Vec<String>,
    pub target_language: String,
    pub setting: Setting,
    pub seed: u64,
    #[serde(default)]
    pub model: ArchConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_prune_limit")]
    pub prune_limit: usize,
    #[serde(default)]
    pub early_stop_on_drop: bool,
    #[serde(default = "default_random_seed")]
    pub random_prune_seed: u64,
    #[serde(default)]
    pub heuristic: Heuristic,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub synth: Option<SynthConfig>,
}

impl ExperimentSpec {
    /// Defaults everywhere except the required fields.
    pub fn new(
        task_kind: TaskKind,
        source_languages: Vec<String>,
        target_language: impl Into<String>,
        setting: Setting,
        seed: u64,
    ) -> Self {
        Self {
            task_kind,
            source_languages,
            target_language: target_language.into(),
            setting,
            seed,
            model: ArchConfig::default(),
            train: TrainConfig::default(),
            prune_limit: DEFAULT_PRUNE_LIMIT,
            early_stop_on_drop: false,
            random_prune_seed: DEFAULT_RANDOM_PRUNE_SEED,
            heuristic: Heuristic::default(),
            data: DataConfig::default(),
            synth: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Validation(format!("cannot serialize spec: {e}")))
    }

    /// Every violation, one message per field.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.source_languages.is_empty() {
            errs.push("source_languages: at least one source language is required".to_string());
        }
        let distinct: BTreeSet<&String> = self.source_languages.iter().collect();
        if distinct.len() != self.source_languages.len() {
            errs.push("source_languages: duplicates".to_string());
        }
        if self.target_language.is_empty() {
            errs.push("target_language: must not be empty".to_string());
        }
        if self.setting == Setting::CrossLingual && distinct.contains(&self.target_language) {
            errs.push(format!(
                "target_language: {} is also a source, so its train split would be fed to a cross_lingual run",
                self.target_language
            ));
        }
        let heads = self.model.num_layers * self.model.num_heads;
        let cap = heads.saturating_sub(self.model.num_layers);
        if self.prune_limit > cap {
            errs.push(format!(
                "prune_limit: {} exceeds L*H - L = {cap} (a layer cannot be emptied)",
                self.prune_limit
            ));
        }
        if let Err(Error::InvalidConfig(e)) = ModelConfig::new(&self.model, 2, 2, self.seed).validate() {
            errs.extend(e.into_iter().map(|m| format!("model: {m}")));
        }
        if !(self.train.learning_rate.is_finite() && self.train.learning_rate > 0.0) {
            errs.push(format!("train.learning_rate: {} must be positive", self.train.learning_rate));
        }
        if self.train.batch_size == 0 {
            errs.push("train.batch_size: must be at least 1".to_string());
        }
        if self.train.importance_batch_size == 0 {
            errs.push("train.importance_batch_size: must be at least 1".to_string());
        }
        if let Some(t) = self.data.target_train_tenths {
            if self.setting != Setting::MultiLingual {
                errs.push("data.target_train_tenths: only valid with setting = multi_lingual".to_string());
            }
            if !(1..=9).contains(&t) {
                errs.push(format!("data.target_train_tenths: {t} not in 1..=9"));
            }
        }
        if let Some(s) = &self.synth {
            for p in s.languages.iter().chain(s.controls.iter().map(|c| &c.profile)) {
                if let Err(Error::InvalidConfig(e)) = p.validate() {
                    errs.extend(e.into_iter().map(|m| format!("synth: {m}")));
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(errs))
        }
    }

    /// First 16 hex digits of SHA-256 over the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("spec serializes");
        seed::sha256_hex(&json)[..16].to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
task_kind = "span"
source_languages = ["xa"]
target_language = "xb"
setting = "cross_lingual"
seed = 7
"#;

    #[test]
    fn defaults() {
        let s = ExperimentSpec::from_toml(MINIMAL).unwrap();
        assert_eq!(s.prune_limit, 12);
        assert_eq!(s.train.epochs, 3);
        assert_eq!(s.train.learning_rate, 5e-5);
        assert_eq!(s.train.batch_size, 16);
        assert_eq!(s.random_prune_seed, 42);
        assert!(!s.early_stop_on_drop);
    }

    #[test]
    fn toml_round_trip_keeps_hash() {
        let s = ExperimentSpec::from_toml(MINIMAL).unwrap();
        let again = ExperimentSpec::from_toml(&s.to_toml().unwrap()).unwrap();
        assert_eq!(s, again);
        assert_eq!(s.hash(), again.hash());
        let mut other = s.clone();
        other.seed = 8;
        assert_ne!(s.hash(), other.hash());
    }

    #[test]
    fn field_level_errors() {
        let text = MINIMAL.replace("\"xb\"", "\"xa\"") + "prune_limit = 40\n[train]\nbatch_size = 0\n";
        match ExperimentSpec::from_toml(&text) {
            Err(Error::InvalidConfig(errs)) => {
                assert!(errs.iter().any(|e| e.starts_with("target_language")));
                assert!(errs.iter().any(|e| e.starts_with("prune_limit")));
                assert!(errs.iter().any(|e| e.starts_with("train.batch_size")));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(ExperimentSpec::from_toml(&(MINIMAL.to_string() + "bogus = 1\n")).is_err());
    }
}
