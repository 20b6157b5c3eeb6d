//! Head importance from accumulated gate gradients, head rankings, and
//! rank correlation between languages.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::TaskKind;
use crate::encoder::{Batch, EncoderModel, HeadCoord, HeadMask};
use crate::error::{Error, Result};
use crate::runner::{check_format_version, write_atomic, FORMAT_VERSION};

/// Tie policy recorded in every ranking.
pub const TIE_POLICY: &str = "ascending score, ties by (layer, head)";

/// Normalized `layers × heads` importance scores in [0, 1] plus provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadImportanceMatrix {
    pub format_version: String,
    pub language_code: String,
    pub task_kind: TaskKind,
    pub model_config_hash: String,
    #[serde(rename = "L")]
    pub layers: usize,
    #[serde(rename = "H")]
    pub heads: usize,
    /// One row per layer.
    pub scores: Vec<Vec<f64>>,
    pub dev_sentence_count: usize,
    pub seed: u64,
    /// Set when every layer-normalized score was equal and the matrix was
    /// filled with 0.5.
    pub degenerate: bool,
    #[serde(default)]
    pub provenance: BTreeMap<String, String>,
}

impl HeadImportanceMatrix {
    /// A matrix with placeholder metadata. Scores must already lie in [0, 1].
    pub fn from_scores(layers: usize, heads: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != layers * heads || layers == 0 || heads == 0 {
            return Err(Error::Validation(format!(
                "{} scores for a {layers}x{heads} matrix",
                flat.len()
            )));
        }
        Ok(Self {
            format_version: FORMAT_VERSION.to_string(),
            language_code: String::new(),
            task_kind: TaskKind::Pos,
            model_config_hash: String::new(),
            layers,
            heads,
            scores: flat.chunks(heads).map(<[f64]>::to_vec).collect(),
            dev_sentence_count: 0,
            seed: 0,
            degenerate: false,
            provenance: BTreeMap::new(),
        })
    }

    pub fn flat(&self) -> Vec<f64> {
        self.scores.iter().flatten().copied().collect()
    }

    pub fn get(&self, c: HeadCoord) -> f64 {
        self.scores[c.layer][c.head]
    }

    pub fn validate(&self) -> Result<()> {
        if self.scores.len() != self.layers || self.scores.iter().any(|r| r.len() != self.heads) {
            return Err(Error::Validation(format!(
                "importance matrix for {} is not {}x{}",
                self.language_code, self.layers, self.heads
            )));
        }
        if let Some(v) = self.flat().into_iter().find(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Validation(format!("importance score {v} outside [0, 1]")));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_str(&text)?;
        check_format_version(&m.format_version, path)?;
        m.validate()?;
        Ok(m)
    }
}

/// Σ over batches of |∂loss/∂gate| per head, row-major. Batches are visited
/// in the given order and parameters are never updated.
pub fn accumulate_head_gradients(
    model: &mut EncoderModel,
    batches: &[Batch],
    mask: &HeadMask,
) -> Result<Vec<f64>> {
    if batches.is_empty() {
        return Err(Error::Validation("importance needs a non-empty dev split".into()));
    }
    let mut acc = vec![0.0; model.config().total_heads()];
    for batch in batches {
        model.backward_batch(batch, mask)?;
        for (a, g) in acc.iter_mut().zip(model.head_gate_grads()?) {
            *a += g;
        }
        model.clear_grads();
    }
    Ok(acc)
}

/// Divides each layer row by its Euclidean norm, then min-max scales the
/// whole matrix to [0, 1]. An all-equal result becomes all 0.5.
pub fn normalize_scores(raw: &[f64], layers: usize, heads: usize) -> Result<HeadImportanceMatrix> {
    if let Some(v) = raw.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::Validation(format!("raw importance {v} is negative or non-finite")));
    }
    let mut m = HeadImportanceMatrix::from_scores(layers, heads, raw)?;
    for row in m.scores.iter_mut() {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        }
    }
    let flat = m.flat();
    let lo = flat.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = flat.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        m.scores
            .iter_mut()
            .flatten()
            .for_each(|v| *v = ((*v - lo) / (hi - lo)).clamp(0.0, 1.0));
    } else {
        m.scores.iter_mut().flatten().for_each(|v| *v = 0.5);
        m.degenerate = true;
    }
    Ok(m)
}

/// Heads in ascending importance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadRanking {
    pub order: Vec<HeadCoord>,
    pub tie_policy: String,
}

/// Ascending ranking of a row-major score vector with the standard tie policy.
pub fn rank_flat(scores: &[f64], heads: usize) -> HeadRanking {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    HeadRanking {
        order: idx.into_iter().map(|i| HeadCoord::new(i / heads, i % heads)).collect(),
        tie_policy: TIE_POLICY.to_string(),
    }
}

pub fn rank_heads(importance: &HeadImportanceMatrix) -> HeadRanking {
    rank_flat(&importance.flat(), importance.heads)
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let mean = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = mean;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub rho: f64,
    pub pair: (String, String),
    pub n: usize,
}

/// Spearman's ρ of two flattened matrices: Pearson correlation of their
/// fractional ranks. A constant input has no rank variance and yields 0.
pub fn spearman_rho(a: &HeadImportanceMatrix, b: &HeadImportanceMatrix) -> Result<CorrelationResult> {
    if (a.layers, a.heads) != (b.layers, b.heads) {
        return Err(Error::Validation(format!(
            "cannot correlate {} ({}x{}) with {} ({}x{})",
            a.language_code, a.layers, a.heads, b.language_code, b.layers, b.heads
        )));
    }
    let (fa, fb) = (a.flat(), b.flat());
    Ok(CorrelationResult {
        rho: pearson(&fractional_ranks(&fa), &fractional_ranks(&fb)),
        pair: (a.language_code.clone(), b.language_code.clone()),
        n: fa.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub languages: Vec<String>,
    pub rho: Vec<Vec<f64>>,
}

impl CorrelationTable {
    /// Header row and column are language codes.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("language");
        for l in &self.languages {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (l, row) in self.languages.iter().zip(&self.rho) {
            out.push_str(l);
            for v in row {
                let _ = write!(out, ",{v:.6}");
            }
            out.push('\n');
        }
        out
    }

    /// Mean ρ over unordered pairs whose languages both satisfy `pick`.
    pub fn mean_off_diagonal(&self, pick: impl Fn(&str, &str) -> bool) -> Option<f64> {
        let mut vals = Vec::new();
        for i in 0..self.languages.len() {
            for j in i + 1..self.languages.len() {
                if pick(&self.languages[i], &self.languages[j]) {
                    vals.push(self.rho[i][j]);
                }
            }
        }
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

pub fn correlation_table(matrices: &[HeadImportanceMatrix]) -> Result<CorrelationTable> {
    if matrices.len() < 2 {
        return Err(Error::Validation("correlation table needs at least 2 matrices".into()));
    }
    let n = matrices.len();
    let mut rho = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let r = spearman_rho(&matrices[i], &matrices[j])?.rho;
            rho[i][j] = r;
            rho[j][i] = r;
        }
    }
    Ok(CorrelationTable {
        languages: matrices.iter().map(|m| m.language_code.clone()).collect(),
        rho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(layers: usize, heads: usize, v: &[f64]) -> HeadImportanceMatrix {
        HeadImportanceMatrix::from_scores(layers, heads, v).unwrap()
    }

    #[test]
    fn hand_normalization() {
        let n = normalize_scores(&[3.0, 4.0, 0.0, 1.0], 2, 2).unwrap();
        let f = n.flat();
        for (a, b) in f.iter().zip([0.6, 0.8, 0.0, 1.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(!n.degenerate);
    }

    #[test]
    fn degenerate_and_negative() {
        let n = normalize_scores(&[2.0; 6], 2, 3).unwrap();
        assert!(n.degenerate);
        assert!(n.flat().iter().all(|&v| v == 0.5));
        assert!(normalize_scores(&[0.0; 4], 2, 2).unwrap().degenerate);
        assert!(normalize_scores(&[1.0, -1.0, 0.0, 0.0], 2, 2).is_err());
    }

    #[test]
    fn ranking_examples() {
        let r = rank_heads(&m(2, 2, &[0.0, 1.0, 0.5, 0.2]));
        let want = [(0, 0), (1, 1), (1, 0), (0, 1)].map(|(l, h)| HeadCoord::new(l, h));
        assert_eq!(r.order, want);
        let flat = rank_heads(&m(2, 2, &[0.5; 4]));
        assert_eq!(flat.order, [(0, 0), (0, 1), (1, 0), (1, 1)].map(|(l, h)| HeadCoord::new(l, h)));
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(fractional_ranks(&[10.0, 20.0, 20.0, 5.0]), vec![2.0, 3.5, 3.5, 1.0]);
    }

    #[test]
    fn spearman_examples() {
        let a = m(1, 3, &[0.0, 0.5, 1.0]);
        let b = m(1, 3, &[0.0, 1.0, 0.5]);
        assert_eq!(spearman_rho(&a, &a).unwrap().rho, 1.0);
        assert_eq!(spearman_rho(&a, &b).unwrap().rho, 0.5);
        let rev = m(1, 3, &[1.0, 0.5, 0.0]);
        assert_eq!(spearman_rho(&a, &rev).unwrap().rho, -1.0);
        assert!(spearman_rho(&a, &m(3, 1, &[0.0, 0.5, 1.0])).is_err());
    }

    #[test]
    fn table_shape() {
        let mut ms = vec![m(1, 3, &[0.0, 0.5, 1.0]), m(1, 3, &[0.0, 1.0, 0.5]), m(1, 3, &[1.0, 0.0, 0.2])];
        for (i, x) in ms.iter_mut().enumerate() {
            x.language_code = format!("l{i}");
        }
        let t = correlation_table(&ms).unwrap();
        assert_eq!(t.rho[0][0], 1.0);
        assert_eq!(t.rho[1][2], t.rho[2][1]);
        assert!(t.to_csv().starts_with("language,l0,l1,l2\nl0,1.000000"));
        assert!(correlation_table(&ms[..1]).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = normalize_scores(&[0.3, 0.1, 0.7, 0.2], 2, 2).unwrap();
        a.language_code = "xa".into();
        a.provenance.insert("epochs".into(), "3".into());
        let p = dir.path().join("imp.json");
        a.save(&p).unwrap();
        assert_eq!(HeadImportanceMatrix::load(&p).unwrap(), a);
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.contains("\"L\": 2"));
    }
}
