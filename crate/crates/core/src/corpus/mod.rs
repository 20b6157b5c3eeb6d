//! Language-tagged sequence-labeling corpora: CoNLL-style ingestion, label
//! harmonization, synthetic multilingual generation and training-set
//! subsampling.

mod bio;
mod conll;
mod harmonize;
mod subsample;
pub mod synth;
mod vocab;

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use bio::{is_valid_bio, repair_bio, BioTag};
pub use conll::{load_conll, parse_conll, to_conll_string, ConllFile};
pub use harmonize::{harmonize_span_labels, DEFAULT_NE_TYPES};
pub use subsample::{partition_indices, subsample_indices, subsample_train, SUBSETS};
pub use synth::{synth_generate, synth_language, LanguageProfile, SplitSizes, WordOrder};
pub use vocab::{LabelSet, Vocab, PAD_ID, UNK_ID};

use crate::error::{Error, Result};
use crate::runner::{check_format_version, write_atomic, FORMAT_VERSION};

/// The 17 universal part-of-speech tags.
pub const UPOS_TAGS: [&str; 17] = [
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM", "PART", "PRON", "PROPN",
    "PUNCT", "SCONJ", "SYM", "VERB", "X",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    /// One tag per token (POS-style).
    Pos,
    /// BIO-encoded spans (NER, slot filling).
    Span,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::Pos => "pos",
            TaskKind::Span => "span",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<String>,
    pub tags: Vec<String>,
}

impl Sentence {
    pub fn new(tokens: Vec<String>, tags: Vec<String>) -> Result<Self> {
        if tokens.is_empty() || tokens.len() != tags.len() {
            return Err(Error::Validation(format!(
                "sentence needs equal, non-zero token and tag counts ({} vs {})",
                tokens.len(),
                tags.len()
            )));
        }
        Ok(Self { tokens, tags })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub language_code: String,
    pub task_kind: TaskKind,
    pub train: Vec<Sentence>,
    pub dev: Vec<Sentence>,
    pub test: Vec<Sentence>,
    pub label_inventory: BTreeSet<String>,
    pub generation_seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct CorpusMeta {
    format_version: String,
    language_code: String,
    task_kind: TaskKind,
    label_inventory: Vec<String>,
    generation_seed: Option<u64>,
}

impl Corpus {
    /// Builds a corpus whose inventory is `extra_labels` plus every tag seen.
    pub fn from_splits(
        language_code: impl Into<String>,
        task_kind: TaskKind,
        train: Vec<Sentence>,
        dev: Vec<Sentence>,
        test: Vec<Sentence>,
        extra_labels: impl IntoIterator<Item = String>,
    ) -> Result<Self> {
        let mut label_inventory: BTreeSet<String> = extra_labels.into_iter().collect();
        for s in train.iter().chain(&dev).chain(&test) {
            label_inventory.extend(s.tags.iter().cloned());
        }
        let c = Self {
            language_code: language_code.into(),
            task_kind,
            train,
            dev,
            test,
            label_inventory,
            generation_seed: None,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn split(&self, split: Split) -> &[Sentence] {
        match split {
            Split::Train => &self.train,
            Split::Dev => &self.dev,
            Split::Test => &self.test,
        }
    }

    pub fn split_mut(&mut self, split: Split) -> &mut Vec<Sentence> {
        match split {
            Split::Train => &mut self.train,
            Split::Dev => &mut self.dev,
            Split::Test => &mut self.test,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for split in Split::ALL {
            for (i, s) in self.split(split).iter().enumerate() {
                let at = || format!("{} {split} sentence {i}", self.language_code);
                if s.tokens.is_empty() || s.tokens.len() != s.tags.len() {
                    return Err(Error::Validation(format!("{}: token/tag length mismatch", at())));
                }
                if let Some(t) = s.tags.iter().find(|t| !self.label_inventory.contains(*t)) {
                    return Err(Error::Validation(format!(
                        "{}: tag {t} not in label inventory",
                        at()
                    )));
                }
                if self.task_kind == TaskKind::Span && !is_valid_bio(&s.tags) {
                    return Err(Error::Validation(format!("{}: invalid BIO sequence", at())));
                }
            }
        }
        Ok(())
    }

    pub fn split_path(dir: &Path, language_code: &str, split: Split) -> PathBuf {
        dir.join(format!("{language_code}.{split}.conll"))
    }

    pub fn meta_path(dir: &Path, language_code: &str) -> PathBuf {
        dir.join(format!("{language_code}.meta.json"))
    }

    /// Writes `<lang>.{train,dev,test}.conll` plus `<lang>.meta.json`.
    /// Returns the written paths.
    pub fn save(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        for split in Split::ALL {
            let path = Self::split_path(dir, &self.language_code, split);
            write_atomic(&path, to_conll_string(self.split(split)).as_bytes())?;
            written.push(path);
        }
        let meta = CorpusMeta {
            format_version: FORMAT_VERSION.to_string(),
            language_code: self.language_code.clone(),
            task_kind: self.task_kind,
            label_inventory: self.label_inventory.iter().cloned().collect(),
            generation_seed: self.generation_seed,
        };
        let path = Self::meta_path(dir, &self.language_code);
        let mut json = serde_json::to_string_pretty(&meta)?;
        json.push('\n');
        write_atomic(&path, json.as_bytes())?;
        written.push(path);
        Ok(written)
    }

    /// Loads what [`save`](Self::save) wrote. Orphan `I-X` tags are repaired
    /// and the repair count is logged.
    pub fn load(dir: &Path, language_code: &str) -> Result<Self> {
        let meta_path = Self::meta_path(dir, language_code);
        let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: CorpusMeta = serde_json::from_str(&text)?;
        check_format_version(&meta.format_version, &meta_path)?;
        if meta.language_code != language_code {
            return Err(Error::Validation(format!(
                "{}: declares language {}",
                meta_path.display(),
                meta.language_code
            )));
        }
        let mut splits = Vec::new();
        for split in Split::ALL {
            let path = Self::split_path(dir, language_code, split);
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            // A saved corpus may legitimately have an empty split.
            if text.trim().is_empty() {
                splits.push(Vec::new());
                continue;
            }
            let file = parse_conll(&text, &path, meta.task_kind)?;
            if file.repairs > 0 {
                log::warn!(
                    "{language_code} {split}: repaired {} orphan I- tags",
                    file.repairs
                );
            }
            splits.push(file.sentences);
        }
        let test = splits.pop().unwrap();
        let dev = splits.pop().unwrap();
        let train = splits.pop().unwrap();
        let mut c = Self::from_splits(
            language_code,
            meta.task_kind,
            train,
            dev,
            test,
            meta.label_inventory,
        )?;
        c.generation_seed = meta.generation_seed;
        Ok(c)
    }
}
