use std::collections::BTreeSet;

use super::bio::BioTag;
use super::{Corpus, TaskKind};
use crate::error::{Error, Result};

pub const DEFAULT_NE_TYPES: [&str; 4] = ["PER", "ORG", "LOC", "MISC"];

/// Rewrites every `B-X`/`I-X` whose type is not in `keep` to `B-MISC`/`I-MISC`.
/// Passing `None` keeps [`DEFAULT_NE_TYPES`].
pub fn harmonize_span_labels(corpus: &Corpus, keep: Option<&BTreeSet<String>>) -> Result<Corpus> {
    if corpus.task_kind != TaskKind::Span {
        return Err(Error::Validation(format!(
            "label harmonization needs a span corpus, {} is {}",
            corpus.language_code, corpus.task_kind
        )));
    }
    let default: BTreeSet<String> = DEFAULT_NE_TYPES.iter().map(|s| s.to_string()).collect();
    let keep = keep.unwrap_or(&default);
    let map = |tag: &str| -> String {
        match BioTag::parse(tag) {
            Some(BioTag::Begin(t)) if !keep.contains(t) => "B-MISC".to_string(),
            Some(BioTag::Inside(t)) if !keep.contains(t) => "I-MISC".to_string(),
            _ => tag.to_string(),
        }
    };
    let mut out = corpus.clone();
    for split in [&mut out.train, &mut out.dev, &mut out.test] {
        for s in split.iter_mut() {
            for t in s.tags.iter_mut() {
                *t = map(t);
            }
        }
    }
    out.label_inventory = corpus.label_inventory.iter().map(|t| map(t)).collect();
    out.validate()?;
    Ok(out)
}
