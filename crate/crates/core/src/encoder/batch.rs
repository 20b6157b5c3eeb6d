use crate::autodiff::IGNORE_INDEX;
use crate::error::{Error, Result};

/// Padded batch of token-id sequences with per-position labels.
///
/// Padding positions have `attention == false` and label [`IGNORE_INDEX`].
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub batch_size: usize,
    pub seq_len: usize,
    pub token_ids: Vec<usize>,
    pub attention: Vec<bool>,
    pub labels: Vec<usize>,
}

impl Batch {
    /// Pads every sequence to the longest one (or to `min_len`, if larger).
    pub fn from_sequences(
        tokens: &[Vec<usize>],
        labels: &[Vec<usize>],
        pad_id: usize,
        min_len: usize,
    ) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::Validation("empty batch".into()));
        }
        if tokens.len() != labels.len() {
            return Err(Error::Validation(format!(
                "{} token sequences but {} label sequences",
                tokens.len(),
                labels.len()
            )));
        }
        let seq_len = tokens.iter().map(Vec::len).max().unwrap_or(0).max(min_len);
        let mut b = Self {
            batch_size: tokens.len(),
            seq_len,
            token_ids: Vec::with_capacity(tokens.len() * seq_len),
            attention: Vec::with_capacity(tokens.len() * seq_len),
            labels: Vec::with_capacity(tokens.len() * seq_len),
        };
        for (i, (t, l)) in tokens.iter().zip(labels).enumerate() {
            if t.is_empty() {
                return Err(Error::Validation(format!("sequence {i} is empty")));
            }
            if t.len() != l.len() {
                return Err(Error::Validation(format!(
                    "sequence {i}: {} tokens but {} labels",
                    t.len(),
                    l.len()
                )));
            }
            for p in 0..seq_len {
                if p < t.len() {
                    b.token_ids.push(t[p]);
                    b.attention.push(true);
                    b.labels.push(l[p]);
                } else {
                    b.token_ids.push(pad_id);
                    b.attention.push(false);
                    b.labels.push(IGNORE_INDEX);
                }
            }
        }
        Ok(b)
    }

    /// Lengths of the unpadded sequences.
    pub fn lengths(&self) -> Vec<usize> {
        self.attention
            .chunks(self.seq_len)
            .map(|row| row.iter().filter(|&&a| a).count())
            .collect()
    }

    pub fn live_positions(&self) -> usize {
        self.labels.iter().filter(|&&l| l != IGNORE_INDEX).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pads_to_longest() {
        let b = Batch::from_sequences(&[vec![5, 6, 7], vec![8]], &[vec![1, 2, 3], vec![0]], 0, 0)
            .unwrap();
        assert_eq!(b.seq_len, 3);
        assert_eq!(b.token_ids, vec![5, 6, 7, 8, 0, 0]);
        assert_eq!(b.attention, vec![true, true, true, true, false, false]);
        assert_eq!(b.labels[4], IGNORE_INDEX);
        assert_eq!(b.lengths(), vec![3, 1]);
        assert_eq!(b.live_positions(), 4);
    }
}
