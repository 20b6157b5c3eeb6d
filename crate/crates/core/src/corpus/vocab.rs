use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;

/// Whitespace-token vocabulary. After the reserved PAD and UNK ids, tokens
/// are ordered by descending frequency, ties by first appearance, so that
/// corpora with near-identical word statistics get near-identical ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let mut counts: Vec<(&str, usize)> = Vec::new();
        let mut slot: HashMap<&str, usize> = HashMap::new();
        for t in tokens {
            let i = *slot.entry(t).or_insert_with(|| {
                counts.push((t, 0));
                counts.len() - 1
            });
            counts[i].1 += 1;
        }
        // Stable sort keeps first-appearance order among equal counts.
        counts.sort_by_key(|c| std::cmp::Reverse(c.1));
        let mut v = Self {
            tokens: vec!["<pad>".into(), "<unk>".into()],
            index: HashMap::new(),
        };
        for (t, _) in counts {
            v.index.insert(t.to_string(), v.tokens.len());
            v.tokens.push(t.to_string());
        }
        v
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// All entries in id order, starting with the two reserved ones.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Inverse of [`tokens`](Self::tokens).
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 {
            return Err(Error::Validation("vocabulary lacks the reserved entries".into()));
        }
        let mut index = HashMap::new();
        for (i, t) in tokens.iter().enumerate().skip(2) {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate vocabulary entry {t:?}")));
            }
        }
        Ok(Self { tokens, index })
    }
}

/// Sorted label inventory with dense ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelSet {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelSet {
    pub fn new(labels: &BTreeSet<String>) -> Self {
        let labels: Vec<String> = labels.iter().cloned().collect();
        let index = labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        Self { labels, index }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn id(&self, label: &str) -> Result<usize> {
        self.index
            .get(label)
            .copied()
            .ok_or_else(|| Error::Validation(format!("label {label} not in inventory")))
    }

    pub fn label(&self, id: usize) -> &str {
        &self.labels[id]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequency_order_and_unk() {
        let v = Vocab::build(["a", "b", "c", "b"]);
        assert_eq!(v.len(), 5);
        assert_eq!(v.id("b"), 2);
        assert_eq!(v.id("a"), 3);
        assert_eq!(v.id("c"), 4);
        assert_eq!(v.id("zzz"), UNK_ID);
        assert_eq!(Vocab::from_tokens(v.tokens().to_vec()).unwrap(), v);
    }

    #[test]
    fn labels_sorted() {
        let set: BTreeSet<String> = ["O", "B-PER", "I-PER"].iter().map(|s| s.to_string()).collect();
        let l = LabelSet::new(&set);
        assert_eq!(l.labels(), &["B-PER", "I-PER", "O"]);
        assert_eq!(l.id("O").unwrap(), 2);
        assert!(l.id("B-LOC").is_err());
    }
}
