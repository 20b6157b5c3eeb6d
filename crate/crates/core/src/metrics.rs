//! Span-level and token-level F1.
//!
//! Both scores are micro-averaged over a split. For POS, every token carries
//! exactly one gold and one predicted label, so token F1 equals accuracy.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{BioTag, Sentence, TaskKind};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold spans (span tasks) or gold tokens (POS).
    pub support: usize,
    pub task_kind: TaskKind,
}

impl EvalResult {
    fn from_counts(tp: usize, predicted: usize, gold: usize, task_kind: TaskKind) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, gold);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f1,
            support: gold,
            task_kind,
        }
    }

    /// `task,P,R,F1,support`
    pub fn csv_line(&self) -> String {
        format!(
            "{},{:.6},{:.6},{:.6},{}",
            self.task_kind, self.precision, self.recall, self.f1, self.support
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

/// Maximal spans of a BIO sequence. An `I-X` that does not continue an open
/// `X` span starts a new one.
pub fn extract_spans<S: AsRef<str>>(tags: &[S]) -> Result<Vec<Span>> {
    let mut spans = Vec::new();
    let mut open: Option<(usize, &str)> = None;
    for (i, tag) in tags.iter().enumerate() {
        let tag = tag.as_ref();
        let parsed = BioTag::parse(tag)
            .ok_or_else(|| Error::Validation(format!("tag {tag:?} at position {i} is not O, B-X or I-X")))?;
        match parsed {
            BioTag::Inside(t) if open.is_some_and(|(_, o)| o == t) => {}
            _ => {
                if let Some((s, t)) = open.take() {
                    spans.push(Span { start: s, end: i, label: t.to_string() });
                }
                if let Some(t) = parsed.entity_type() {
                    open = Some((i, t));
                }
            }
        }
    }
    if let Some((s, t)) = open {
        spans.push(Span { start: s, end: tags.len(), label: t.to_string() });
    }
    Ok(spans)
}

fn check_aligned<S: AsRef<str>>(gold: &[Sentence], predicted: &[Vec<S>]) -> Result<()> {
    if gold.len() != predicted.len() {
        return Err(Error::Validation(format!(
            "{} gold sentences but {} predictions",
            gold.len(),
            predicted.len()
        )));
    }
    for (i, (g, p)) in gold.iter().zip(predicted).enumerate() {
        if g.tags.len() != p.len() {
            return Err(Error::Validation(format!(
                "sentence {i}: {} gold tags but {} predicted",
                g.tags.len(),
                p.len()
            )));
        }
    }
    Ok(())
}

/// Exact-match span F1: a predicted span counts only when start, end and
/// type all match a gold span.
pub fn span_f1<S: AsRef<str>>(gold: &[Sentence], predicted: &[Vec<S>]) -> Result<EvalResult> {
    check_aligned(gold, predicted)?;
    let (mut tp, mut n_pred, mut n_gold) = (0, 0, 0);
    for (g, p) in gold.iter().zip(predicted) {
        let gs: HashSet<Span> = extract_spans(&g.tags)?.into_iter().collect();
        let ps: HashSet<Span> = extract_spans(p)?.into_iter().collect();
        tp += gs.intersection(&ps).count();
        n_pred += ps.len();
        n_gold += gs.len();
    }
    Ok(EvalResult::from_counts(tp, n_pred, n_gold, TaskKind::Span))
}

/// Micro token F1 (accuracy under total labeling).
pub fn token_f1<S: AsRef<str>>(gold: &[Sentence], predicted: &[Vec<S>]) -> Result<EvalResult> {
    check_aligned(gold, predicted)?;
    let mut tp = 0;
    let mut n = 0;
    for (g, p) in gold.iter().zip(predicted) {
        tp += g.tags.iter().zip(p).filter(|(a, b)| a.as_str() == b.as_ref()).count();
        n += g.tags.len();
    }
    Ok(EvalResult::from_counts(tp, n, n, TaskKind::Pos))
}

pub fn evaluate<S: AsRef<str>>(task_kind: TaskKind, gold: &[Sentence], predicted: &[Vec<S>]) -> Result<EvalResult> {
    match task_kind {
        TaskKind::Pos => token_f1(gold, predicted),
        TaskKind::Span => span_f1(gold, predicted),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sent(tags: &[&str]) -> Sentence {
        Sentence::new(
            tags.iter().map(|_| "w".to_string()).collect(),
            tags.iter().map(|t| t.to_string()).collect(),
        )
        .unwrap()
    }

    fn span(start: usize, end: usize, label: &str) -> Span {
        Span { start, end, label: label.into() }
    }

    #[test]
    fn spans() {
        assert_eq!(extract_spans(&["B-PER", "I-PER", "O"]).unwrap(), vec![span(0, 2, "PER")]);
        assert!(extract_spans(&["O", "O", "O"]).unwrap().is_empty());
        assert_eq!(
            extract_spans(&["B-LOC", "B-LOC"]).unwrap(),
            vec![span(0, 1, "LOC"), span(1, 2, "LOC")]
        );
        assert_eq!(
            extract_spans(&["I-ORG", "I-ORG", "I-PER"]).unwrap(),
            vec![span(0, 2, "ORG"), span(2, 3, "PER")]
        );
        assert!(extract_spans(&["X-1"]).is_err());
    }

    #[test]
    fn span_scores() {
        let gold = vec![sent(&["B-PER", "I-PER", "O"])];
        let perfect = span_f1(&gold, &[vec!["B-PER", "I-PER", "O"]]).unwrap();
        assert_eq!((perfect.precision, perfect.recall, perfect.f1), (1.0, 1.0, 1.0));
        let none = span_f1(&gold, &[vec!["O", "O", "O"]]).unwrap();
        assert_eq!((none.precision, none.recall, none.f1, none.support), (0.0, 0.0, 0.0, 1));
        assert_eq!(span_f1(&gold, &[vec!["B-PER", "O", "O"]]).unwrap().f1, 0.0);
    }

    #[test]
    fn token_scores() {
        let gold = vec![sent(&["NOUN", "VERB"])];
        assert_eq!(token_f1(&gold, &[vec!["NOUN", "VERB"]]).unwrap().f1, 1.0);
        assert_eq!(token_f1(&gold, &[vec!["NOUN", "ADJ"]]).unwrap().f1, 0.5);
    }

    #[test]
    fn misalignment_reports_sentence() {
        let gold = vec![sent(&["O"]), sent(&["O", "O"])];
        let err = span_f1(&gold, &[vec!["O"], vec!["O"]]).unwrap_err();
        assert!(err.to_string().contains("sentence 1"));
    }

    #[test]
    fn csv() {
        let r = token_f1(&[sent(&["A", "B"])], &[vec!["A", "C"]]).unwrap();
        assert_eq!(r.csv_line(), "pos,0.500000,0.500000,0.500000,2");
    }
}
