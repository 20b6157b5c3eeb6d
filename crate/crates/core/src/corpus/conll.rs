use std::fs;
use std::path::Path;

use super::bio::{repair_bio, BioTag};
use super::{Sentence, TaskKind};
use crate::error::{Error, Result};

/// Sentences read from one two-column file.
#[derive(Clone, Debug, PartialEq)]
pub struct ConllFile {
    pub sentences: Vec<Sentence>,
    /// Orphan `I-X` tags promoted to `B-X` (span tasks only).
    pub repairs: usize,
}

/// Reads `token <tab|spaces> tag` lines; blank lines separate sentences.
pub fn load_conll(path: &Path, task_kind: TaskKind) -> Result<ConllFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_conll(&text, path, task_kind)
}

pub fn parse_conll(text: &str, path: &Path, task_kind: TaskKind) -> Result<ConllFile> {
    let mut sentences = Vec::new();
    let mut repairs = 0;
    let mut tokens = Vec::new();
    let mut tags: Vec<String> = Vec::new();
    let mut flush = |tokens: &mut Vec<String>, tags: &mut Vec<String>| {
        if tokens.is_empty() {
            return;
        }
        if task_kind == TaskKind::Span {
            repairs += repair_bio(tags);
        }
        sentences.push(Sentence {
            tokens: std::mem::take(tokens),
            tags: std::mem::take(tags),
        });
    };
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            flush(&mut tokens, &mut tags);
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("expected 2 columns, found {}", cols.len()),
            });
        }
        if task_kind == TaskKind::Span && BioTag::parse(cols[1]).is_none() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("tag {:?} is not O, B-X or I-X", cols[1]),
            });
        }
        tokens.push(cols[0].to_string());
        tags.push(cols[1].to_string());
    }
    flush(&mut tokens, &mut tags);
    if sentences.is_empty() {
        return Err(Error::Validation(format!("{}: no sentences", path.display())));
    }
    Ok(ConllFile { sentences, repairs })
}

/// Tab-separated two-column text, one blank line after each sentence.
pub fn to_conll_string(sentences: &[Sentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        for (tok, tag) in s.tokens.iter().zip(&s.tags) {
            out.push_str(tok);
            out.push('\t');
            out.push_str(tag);
            out.push('\n');
        }
        out.push('\n');
    }
    out
}
