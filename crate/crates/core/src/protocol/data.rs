use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::spec::{ExperimentSpec, Setting};
use crate::corpus::{subsample_indices, Corpus, LabelSet, Sentence, Split, Vocab, PAD_ID};
use crate::encoder::Batch;
use crate::error::{Error, Result};

/// Corpora keyed by language code.
pub type Corpora = BTreeMap<String, Corpus>;

pub fn corpus<'a>(corpora: &'a Corpora, lang: &str) -> Result<&'a Corpus> {
    corpora
        .get(lang)
        .ok_or_else(|| Error::MissingArtifact(format!("corpus for language {lang}")))
}

/// One contiguous block of sentences drawn from a corpus split.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoaderEntry {
    pub language: String,
    pub split: Split,
    /// Sentence indices within the split, in feed order.
    pub indices: Vec<usize>,
}

/// Record of every sentence a data loader handed to training.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoaderLog {
    pub entries: Vec<LoaderEntry>,
}

impl LoaderLog {
    pub fn fed(&self, language: &str, split: Split) -> BTreeSet<usize> {
        self.entries
            .iter()
            .filter(|e| e.language == language && e.split == split)
            .flat_map(|e| e.indices.iter().copied())
            .collect()
    }

    pub fn total(&self) -> usize {
        self.entries.iter().map(|e| e.indices.len()).sum()
    }
}

/// Training sentences in feed order, with the log that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    pub sentences: Vec<Sentence>,
    pub log: LoaderLog,
}

impl TrainingSet {
    fn push(&mut self, c: &Corpus, split: Split, indices: Vec<usize>) {
        let src = c.split(split);
        self.sentences.extend(indices.iter().map(|&i| src[i].clone()));
        self.log.entries.push(LoaderEntry {
            language: c.language_code.clone(),
            split,
            indices,
        });
    }

    /// The full train split of one language.
    pub fn monolingual(c: &Corpus) -> Self {
        let mut t = Self { sentences: Vec::new(), log: LoaderLog::default() };
        t.push(c, Split::Train, (0..c.train.len()).collect());
        t
    }

    /// Source train splits in declared order, followed by the (possibly
    /// subsampled) target train split under the multi-lingual setting.
    pub fn for_spec(spec: &ExperimentSpec, corpora: &Corpora) -> Result<Self> {
        let mut t = Self { sentences: Vec::new(), log: LoaderLog::default() };
        for lang in &spec.source_languages {
            let c = corpus(corpora, lang)?;
            t.push(c, Split::Train, (0..c.train.len()).collect());
        }
        if spec.setting == Setting::MultiLingual {
            let c = corpus(corpora, &spec.target_language)?;
            let idx = match spec.data.target_train_tenths {
                Some(k) => subsample_indices(c.train.len(), k, spec.data.subsample_seed)?,
                None => (0..c.train.len()).collect(),
            };
            t.push(c, Split::Train, idx);
        }
        check_hygiene(spec, &t.log)?;
        if t.sentences.is_empty() {
            return Err(Error::Validation("no training sentences".into()));
        }
        Ok(t)
    }
}

/// Under the cross-lingual setting the target train split must never be fed.
pub fn check_hygiene(spec: &ExperimentSpec, log: &LoaderLog) -> Result<()> {
    if spec.setting == Setting::CrossLingual && !log.fed(&spec.target_language, Split::Train).is_empty() {
        return Err(Error::Validation(format!(
            "hygiene violation: {} train sentences reached a cross_lingual training run",
            spec.target_language
        )));
    }
    Ok(())
}

/// Sequential, unshuffled batches.
pub fn make_batches(
    sentences: &[Sentence],
    vocab: &Vocab,
    labels: &LabelSet,
    batch_size: usize,
) -> Result<Vec<Batch>> {
    sentences
        .chunks(batch_size.max(1))
        .map(|chunk| {
            let tokens: Vec<Vec<usize>> =
                chunk.iter().map(|s| s.tokens.iter().map(|t| vocab.id(t)).collect()).collect();
            let tags = chunk
                .iter()
                .map(|s| s.tags.iter().map(|t| labels.id(t)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?;
            Batch::from_sequences(&tokens, &tags, PAD_ID, 0)
        })
        .collect()
}

/// Vocabulary of the sentences a model is trained on.
pub fn build_vocab(sentences: &[Sentence]) -> Vocab {
    Vocab::build(sentences.iter().flat_map(|s| s.tokens.iter().map(String::as_str)))
}

/// Sorted union of the label inventories of the given corpora.
pub fn label_set<'a>(corpora: impl IntoIterator<Item = &'a Corpus>) -> LabelSet {
    let mut all = BTreeSet::new();
    for c in corpora {
        all.extend(c.label_inventory.iter().cloned());
    }
    LabelSet::new(&all)
}
