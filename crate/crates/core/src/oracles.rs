//! Brute-force reference implementations for tests.
//!
//! Nothing here calls the code it checks: the encoder forward is rewritten
//! over plain `f64` slices, ranks are counted pairwise, and spans are found
//! by enumerating every `(start, end)` pair.

use crate::corpus::{LabelSet, Sentence, TaskKind};
use crate::encoder::{ArchConfig, Batch, EncoderModel, HeadCoord, HeadMask};
use crate::error::{Error, Result};
use crate::protocol::{train_model, TrainConfig};

/// Largest model `exhaustive_prune` accepts, in heads.
pub const EXHAUSTIVE_MAX_HEADS: usize = 4;
/// Largest training corpus `exhaustive_prune` accepts, in sentences.
pub const EXHAUSTIVE_MAX_SENTENCES: usize = 200;

/// One reference-versus-system comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    pub case: String,
    pub reference: f64,
    pub system: f64,
    pub abs_error: f64,
    pub rel_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleReport {
    pub const CSV_HEADER: &'static str = "case,reference,system,abs_error,rel_error,tolerance,pass";

    /// Relative error `|r - s| / max(|r|, |s|, floor)`. The floor keeps
    /// near-zero pairs from being judged on rounding noise alone.
    pub fn relative(case: impl Into<String>, reference: f64, system: f64, tolerance: f64, floor: f64) -> Self {
        let abs_error = (reference - system).abs();
        let rel_error = abs_error / reference.abs().max(system.abs()).max(floor);
        Self {
            case: case.into(),
            reference,
            system,
            abs_error,
            rel_error,
            tolerance,
            pass: rel_error <= tolerance,
        }
    }

    /// Passes only on bitwise-equal values.
    pub fn exact(case: impl Into<String>, reference: f64, system: f64) -> Self {
        let abs_error = (reference - system).abs();
        Self {
            case: case.into(),
            reference,
            system,
            abs_error,
            rel_error: if abs_error == 0.0 { 0.0 } else { abs_error / reference.abs().max(system.abs()) },
            tolerance: 0.0,
            pass: reference.to_bits() == system.to_bits() || reference == system,
        }
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{:e},{:e},{:e},{:e},{:e},{}",
            self.case.replace(',', ";"),
            self.reference,
            self.system,
            self.abs_error,
            self.rel_error,
            self.tolerance,
            self.pass
        )
    }
}

/// CSV document of reports, header first.
pub fn reports_csv(reports: &[OracleReport]) -> String {
    let mut out = String::from(OracleReport::CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

/// Central differences `(f(x + ε e_i) - f(x - ε e_i)) / 2ε` for each
/// selected coordinate `i`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], selected: &[usize], eps: f64) -> Result<Vec<f64>> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::Validation(format!("finite-difference step {eps} must be positive")));
    }
    let mut probe = x.to_vec();
    selected
        .iter()
        .map(|&i| {
            if i >= x.len() {
                return Err(Error::Validation(format!("coordinate {i} outside {} inputs", x.len())));
            }
            probe[i] = x[i] + eps;
            let up = f(&probe);
            probe[i] = x[i] - eps;
            let down = f(&probe);
            probe[i] = x[i];
            if !(up.is_finite() && down.is_finite()) {
                return Err(Error::Numeric(format!("loss not finite around coordinate {i}")));
            }
            Ok((up - down) / (2.0 * eps))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Reference encoder forward

fn weights<'a>(model: &'a EncoderModel, name: &str) -> &'a [f64] {
    model
        .param(name)
        .unwrap_or_else(|| panic!("model has no parameter {name}"))
        .values()
}

/// `x [n, din] · w [din, dout] + b`
fn dense(x: &[f64], n: usize, din: usize, w: &[f64], b: &[f64], dout: usize) -> Vec<f64> {
    let mut y = vec![0.0; n * dout];
    for r in 0..n {
        for o in 0..dout {
            let mut acc = b[o];
            for i in 0..din {
                acc += x[r * din + i] * w[i * dout + o];
            }
            y[r * dout + o] = acc;
        }
    }
    y
}

fn norm_rows(x: &mut [f64], d: usize, gamma: &[f64], beta: &[f64]) {
    for row in x.chunks_mut(d) {
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
        let inv = 1.0 / (var + 1e-5).sqrt();
        for (j, v) in row.iter_mut().enumerate() {
            *v = (*v - mean) * inv * gamma[j] + beta[j];
        }
    }
}

fn tanh_gelu(x: f64) -> f64 {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    0.5 * x * (1.0 + (c * (x + 0.044715 * x.powi(3))).tanh())
}

/// Logits `[seq, labels]` for one unpadded sequence, with each head's
/// context scaled by `gates[l * H + h]` and by its mask bit.
pub fn reference_logits(model: &EncoderModel, tokens: &[usize], mask: &HeadMask, gates: &[f64]) -> Vec<f64> {
    let cfg = model.config();
    let (d, f, nh) = (cfg.model_dim, cfg.feedforward_dim, cfg.num_heads);
    let dh = d / nh;
    let s = tokens.len();
    let tok = weights(model, "embeddings.token");
    let pos = weights(model, "embeddings.position");
    let mut x = vec![0.0; s * d];
    for (p, &t) in tokens.iter().enumerate() {
        for j in 0..d {
            x[p * d + j] = tok[t * d + j] + pos[p * d + j];
        }
    }
    norm_rows(&mut x, d, weights(model, "embeddings.ln.gamma"), weights(model, "embeddings.ln.beta"));

    for l in 0..cfg.num_layers {
        let w = |suffix: &str| weights(model, &format!("layers.{l}.{suffix}"));
        let q = dense(&x, s, d, w("attn.q.weight"), w("attn.q.bias"), d);
        let k = dense(&x, s, d, w("attn.k.weight"), w("attn.k.bias"), d);
        let v = dense(&x, s, d, w("attn.v.weight"), w("attn.v.bias"), d);
        let mut ctx = vec![0.0; s * d];
        for h in 0..nh {
            let scale = gates[l * nh + h] * if mask.is_active(l, h) { 1.0 } else { 0.0 };
            for i in 0..s {
                let mut att: Vec<f64> = (0..s)
                    .map(|j| (0..dh).map(|c| q[i * d + h * dh + c] * k[j * d + h * dh + c]).sum::<f64>() / (dh as f64).sqrt())
                    .collect();
                let top = att.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                att.iter_mut().for_each(|a| *a = (*a - top).exp());
                let z: f64 = att.iter().sum();
                for c in 0..dh {
                    let mixed: f64 = (0..s).map(|j| att[j] / z * v[j * d + h * dh + c]).sum();
                    ctx[i * d + h * dh + c] = mixed * scale;
                }
            }
        }
        let attn = dense(&ctx, s, d, w("attn.o.weight"), w("attn.o.bias"), d);
        x.iter_mut().zip(&attn).for_each(|(a, b)| *a += b);
        norm_rows(&mut x, d, w("ln1.gamma"), w("ln1.beta"));
        let mut hid = dense(&x, s, d, w("ff1.weight"), w("ff1.bias"), f);
        hid.iter_mut().for_each(|v| *v = tanh_gelu(*v));
        let out = dense(&hid, s, f, w("ff2.weight"), w("ff2.bias"), d);
        x.iter_mut().zip(&out).for_each(|(a, b)| *a += b);
        norm_rows(&mut x, d, w("ln2.gamma"), w("ln2.beta"));
    }
    dense(&x, s, d, weights(model, "classifier.weight"), weights(model, "classifier.bias"), cfg.num_labels)
}

/// Mean token cross-entropy of one unpadded sequence under the reference forward.
pub fn reference_loss(model: &EncoderModel, tokens: &[usize], gold: &[usize], mask: &HeadMask, gates: &[f64]) -> f64 {
    let c = model.config().num_labels;
    let logits = reference_logits(model, tokens, mask, gates);
    let mut total = 0.0;
    for (p, &g) in gold.iter().enumerate() {
        let row = &logits[p * c..(p + 1) * c];
        let top = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = row.iter().map(|v| (v - top).exp()).sum::<f64>().ln() + top;
        total += lse - row[g];
    }
    total / gold.len() as f64
}

/// Σ over sentences of |∂loss/∂gate| per head, each sentence scored alone and
/// each derivative taken by central differences around gate = 1.
pub fn fd_gate_importance(
    model: &EncoderModel,
    sentences: &[(Vec<usize>, Vec<usize>)],
    mask: &HeadMask,
    eps: f64,
) -> Result<Vec<f64>> {
    let n = model.config().num_layers * model.config().num_heads;
    let ones = vec![1.0; n];
    let all: Vec<usize> = (0..n).collect();
    let mut acc = vec![0.0; n];
    for (tokens, gold) in sentences {
        let g = fd_gradient(|gates| reference_loss(model, tokens, gold, mask, gates), &ones, &all, eps)?;
        acc.iter_mut().zip(g).for_each(|(a, v)| *a += v.abs());
    }
    Ok(acc)
}

/// Unpadded sentences of a batch as `(token ids, label ids)` pairs.
pub fn unpad(batch: &Batch) -> Vec<(Vec<usize>, Vec<usize>)> {
    (0..batch.batch_size)
        .map(|b| {
            let row = b * batch.seq_len..(b + 1) * batch.seq_len;
            let live: Vec<usize> = row.filter(|&i| batch.attention[i]).collect();
            (
                live.iter().map(|&i| batch.token_ids[i]).collect(),
                live.iter().map(|&i| batch.labels[i]).collect(),
            )
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Ranks and correlation

/// 1-based ranks by pairwise counting: `1 + #smaller + (#equal - 1) / 2`.
pub fn naive_ranks(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|&v| {
            let smaller = values.iter().filter(|&&w| w < v).count();
            let equal = values.iter().filter(|&&w| w == v).count();
            1.0 + smaller as f64 + (equal as f64 - 1.0) / 2.0
        })
        .collect()
}

/// Spearman ρ as the textbook Pearson correlation of explicit rank vectors;
/// 0 when either side has no rank variance.
pub fn naive_spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (naive_ranks(a), naive_ranks(b));
    let n = ra.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for i in 0..ra.len() {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        (cov / (va * vb).sqrt()).clamp(-1.0, 1.0)
    }
}

// ---------------------------------------------------------------------------
// Span scoring

/// Whether `tags[start..end]` is exactly one maximal span, with the same
/// reading of stray `I-X` tags as the metrics module (they open a span).
fn is_span_at(tags: &[&str], start: usize, end: usize) -> Option<String> {
    let kind = |t: &str| t.get(2..).map(str::to_string);
    let first = tags[start];
    let label = if first.starts_with("B-") || first.starts_with("I-") { kind(first)? } else { return None };
    if first.starts_with("I-") && start > 0 {
        let prev = tags[start - 1];
        if (prev.starts_with("B-") || prev.starts_with("I-")) && kind(prev).as_deref() == Some(&label) {
            return None;
        }
    }
    let inside = format!("I-{label}");
    if tags[start + 1..end].iter().any(|t| *t != inside) {
        return None;
    }
    if end < tags.len() && tags[end] == inside {
        return None;
    }
    Some(label)
}

fn naive_spans(tags: &[&str]) -> Vec<(usize, usize, String)> {
    let mut out = Vec::new();
    for start in 0..tags.len() {
        for end in start + 1..=tags.len() {
            if let Some(label) = is_span_at(tags, start, end) {
                out.push((start, end, label));
            }
        }
    }
    out
}

/// `(true positives, predicted spans, gold spans)` by exhaustive enumeration.
pub fn naive_span_counts(gold: &[Vec<String>], predicted: &[Vec<String>]) -> (usize, usize, usize) {
    let (mut tp, mut np, mut ng) = (0, 0, 0);
    for (g, p) in gold.iter().zip(predicted) {
        let gs = naive_spans(&g.iter().map(String::as_str).collect::<Vec<_>>());
        let ps = naive_spans(&p.iter().map(String::as_str).collect::<Vec<_>>());
        tp += ps.iter().filter(|s| gs.contains(s)).count();
        np += ps.len();
        ng += gs.len();
    }
    (tp, np, ng)
}

/// `(precision, recall, f1)` from naive span counts.
pub fn naive_span_prf(gold: &[Vec<String>], predicted: &[Vec<String>]) -> (f64, f64, f64) {
    let (tp, np, ng) = naive_span_counts(gold, predicted);
    let p = if np == 0 { 0.0 } else { tp as f64 / np as f64 };
    let r = if ng == 0 { 0.0 } else { tp as f64 / ng as f64 };
    let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    (p, r, f)
}

// ---------------------------------------------------------------------------
// Exhaustive pruning

/// Score after fine-tuning with `removed` masked; `None` is the unpruned run.
#[derive(Clone, Debug, PartialEq)]
pub struct PruneRow {
    pub removed: Option<HeadCoord>,
    pub f1: f64,
}

/// Fine-tunes once unpruned and once per single-head removal. Row 0 is the
/// unpruned baseline; the remaining rows follow row-major head order.
pub fn exhaustive_prune(
    arch: &ArchConfig,
    seed: u64,
    task_kind: TaskKind,
    train: &[Sentence],
    labels: &LabelSet,
    test: &[Sentence],
    cfg: &TrainConfig,
) -> Result<Vec<PruneRow>> {
    if arch.total_heads() > EXHAUSTIVE_MAX_HEADS || train.len() > EXHAUSTIVE_MAX_SENTENCES {
        return Err(Error::Validation(format!(
            "exhaustive pruning budget exceeded: {} heads, {} sentences (limits {EXHAUSTIVE_MAX_HEADS}, {EXHAUSTIVE_MAX_SENTENCES})",
            arch.total_heads(),
            train.len()
        )));
    }
    let mut candidates = vec![None];
    for l in 0..arch.num_layers {
        for h in 0..arch.num_heads {
            candidates.push(Some(HeadCoord::new(l, h)));
        }
    }
    candidates
        .into_iter()
        .map(|removed| {
            let mut mask = HeadMask::full(arch.num_layers, arch.num_heads);
            if let Some(c) = removed {
                mask.prune(c)?;
            }
            let trained = train_model(arch, seed, train, labels.clone(), &mask, cfg)?;
            let f1 = trained.evaluate(task_kind, &mask, test, cfg.batch_size)?.f1;
            Ok(PruneRow { removed, f1 })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_and_constant() {
        let g = fd_gradient(|x| x[0] * x[0], &[3.0], &[0], 1e-4).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-6);
        assert_eq!(fd_gradient(|_| 2.5, &[1.0, 2.0], &[0, 1], 1e-4).unwrap(), vec![0.0, 0.0]);
        assert!(fd_gradient(|x| x[0], &[1.0], &[0], 0.0).is_err());
        assert!(fd_gradient(|x| 1.0 / x[0], &[0.0], &[0], 1e-4).is_ok());
        assert!(fd_gradient(|x| (x[0] - 1.0).ln(), &[1.0], &[0], 1e-4).is_err());
    }

    #[test]
    fn ranks_by_counting() {
        assert_eq!(naive_ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
        assert_eq!(naive_spearman(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]), 0.5);
        assert_eq!(naive_spearman(&[1.0, 1.0], &[1.0, 2.0]), 0.0);
    }

    #[test]
    fn span_enumeration() {
        let t = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let gold = vec![t(&["B-PER", "I-PER", "O", "I-LOC", "B-LOC"])];
        let spans = naive_spans(&["B-PER", "I-PER", "O", "I-LOC", "B-LOC"]);
        assert_eq!(spans.len(), 3);
        assert_eq!(naive_span_counts(&gold, &gold), (3, 3, 3));
        let pred = vec![t(&["B-PER", "O", "O", "I-LOC", "I-LOC"])];
        assert_eq!(naive_span_counts(&gold, &pred), (0, 2, 3));
    }

    #[test]
    fn report_flags() {
        assert!(OracleReport::relative("a", 1.0, 1.0005, 1e-3, 1e-8).pass);
        assert!(!OracleReport::relative("a", 1.0, 1.01, 1e-3, 1e-8).pass);
        assert!(OracleReport::exact("b", 0.5, 0.5).pass);
        assert!(reports_csv(&[OracleReport::exact("x,y", 1.0, 2.0)]).lines().nth(1).unwrap().starts_with("x;y,"));
    }
}
