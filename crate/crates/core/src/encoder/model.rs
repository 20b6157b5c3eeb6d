use rand_distr::{Distribution, Normal};

use super::batch::Batch;
use super::config::ModelConfig;
use super::mask::{HeadCoord, HeadMask};
use crate::autodiff::{Graph, NodeId, Tensor};
use crate::error::{Error, Result};
use crate::seed;

/// Additive attention bias for padded keys; softmax sends them to exactly 0.
const PAD_BIAS: f64 = -1e9;

const TOK_EMB: usize = 0;
const POS_EMB: usize = 1;
const EMB_LN_G: usize = 2;
const EMB_LN_B: usize = 3;
const FIRST_LAYER: usize = 4;

/// Parameter slots within one layer, in storage order.
#[derive(Clone, Copy)]
enum Slot {
    QW,
    QB,
    KW,
    KB,
    VW,
    VB,
    OW,
    OB,
    Ln1G,
    Ln1B,
    Ff1W,
    Ff1B,
    Ff2W,
    Ff2B,
    Ln2G,
    Ln2B,
}

const LAYER_SLOTS: [(Slot, &str); 16] = [
    (Slot::QW, "attn.q.weight"),
    (Slot::QB, "attn.q.bias"),
    (Slot::KW, "attn.k.weight"),
    (Slot::KB, "attn.k.bias"),
    (Slot::VW, "attn.v.weight"),
    (Slot::VB, "attn.v.bias"),
    (Slot::OW, "attn.o.weight"),
    (Slot::OB, "attn.o.bias"),
    (Slot::Ln1G, "ln1.gamma"),
    (Slot::Ln1B, "ln1.beta"),
    (Slot::Ff1W, "ff1.weight"),
    (Slot::Ff1B, "ff1.bias"),
    (Slot::Ff2W, "ff2.weight"),
    (Slot::Ff2B, "ff2.bias"),
    (Slot::Ln2G, "ln2.gamma"),
    (Slot::Ln2B, "ln2.beta"),
];

/// Node handles produced by one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    /// `[batch, seq, labels]`
    pub logits: NodeId,
    pub params: Vec<NodeId>,
    /// Row-major `layers × heads`.
    pub gates: Vec<NodeId>,
}

/// Token-classification transformer encoder (post-layer-norm, learned
/// positions) with one scalar gate per attention head.
///
/// Gates always hold 1.0; only their gradients are read. A head's context
/// output is multiplied by its gate and then by its mask bit before the
/// output projection, so a masked head receives zero gate gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderModel {
    config: ModelConfig,
    names: Vec<String>,
    params: Vec<Tensor>,
    gates: Vec<Tensor>,
}

impl EncoderModel {
    /// Deterministic initialization: each parameter draws from its own
    /// stream keyed by the config seed and the parameter name, so shared
    /// parameters agree across models that differ only in vocabulary.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let d = config.model_dim;
        let f = config.feedforward_dim;
        let mut names = Vec::new();
        let mut params = Vec::new();
        let mut add = |name: String, shape: Vec<usize>, init: Init| -> Result<()> {
            let n: usize = shape.iter().product();
            let values = match init {
                Init::Normal(std) => {
                    let mut rng = seed::rng_for(config.seed, &name);
                    let dist = Normal::new(0.0, std).expect("positive std");
                    (0..n).map(|_| dist.sample(&mut rng)).collect()
                }
                Init::Const(c) => vec![c; n],
            };
            params.push(Tensor::param(shape, values)?);
            names.push(name);
            Ok(())
        };
        let fan = |n: usize| Init::Normal(1.0 / (n as f64).sqrt());
        add("embeddings.token".into(), vec![config.vocab_size, d], Init::Normal(1.0))?;
        add("embeddings.position".into(), vec![config.max_sequence_length, d], Init::Normal(0.5))?;
        add("embeddings.ln.gamma".into(), vec![d], Init::Const(1.0))?;
        add("embeddings.ln.beta".into(), vec![d], Init::Const(0.0))?;
        for l in 0..config.num_layers {
            for (slot, suffix) in LAYER_SLOTS {
                let name = format!("layers.{l}.{suffix}");
                let (shape, init) = match slot {
                    Slot::QW | Slot::KW | Slot::VW | Slot::OW => (vec![d, d], fan(d)),
                    Slot::QB | Slot::KB | Slot::VB | Slot::OB | Slot::Ff2B => {
                        (vec![d], Init::Const(0.0))
                    }
                    Slot::Ln1G | Slot::Ln2G => (vec![d], Init::Const(1.0)),
                    Slot::Ln1B | Slot::Ln2B => (vec![d], Init::Const(0.0)),
                    Slot::Ff1W => (vec![d, f], fan(d)),
                    Slot::Ff1B => (vec![f], Init::Const(0.0)),
                    Slot::Ff2W => (vec![f, d], fan(f)),
                };
                add(name, shape, init)?;
            }
        }
        add("classifier.weight".into(), vec![d, config.num_labels], fan(d))?;
        add("classifier.bias".into(), vec![config.num_labels], Init::Const(0.0))?;

        let gates = (0..config.total_heads())
            .map(|_| Tensor::param(vec![1], vec![1.0]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config,
            names,
            params,
            gates,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.params[i])
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(&mut self.params[i])
    }

    pub fn num_parameters(&self) -> usize {
        self.params.iter().map(Tensor::numel).sum()
    }

    /// Gate tensors, row-major `layers × heads`.
    pub fn gates(&self) -> &[Tensor] {
        &self.gates
    }

    pub(crate) fn replace_params(&mut self, params: Vec<Tensor>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::Validation(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        for ((name, old), new) in self.names.iter().zip(&self.params).zip(&params) {
            if old.shape() != new.shape() {
                return Err(Error::Validation(format!(
                    "parameter {name}: shape {:?} does not match config shape {:?}",
                    new.shape(),
                    old.shape()
                )));
            }
        }
        self.params = params;
        Ok(())
    }

    /// Records the forward pass on `graph`.
    pub fn forward(&self, graph: &mut Graph, batch: &Batch, mask: &HeadMask) -> Result<ForwardPass> {
        let ones = vec![1.0; self.config.total_heads()];
        self.forward_with_gate_values(graph, batch, mask, &ones)
    }

    /// Forward pass with the gate leaves set to `gate_values` instead of 1.0.
    /// Used to probe that gates are live in the graph; the model's own gates
    /// are not modified.
    pub fn forward_with_gate_values(
        &self,
        graph: &mut Graph,
        batch: &Batch,
        mask: &HeadMask,
        gate_values: &[f64],
    ) -> Result<ForwardPass> {
        let cfg = &self.config;
        self.check_inputs(batch, mask)?;
        if gate_values.len() != cfg.total_heads() {
            return Err(Error::shape("forward", "one gate value per head required"));
        }
        let (b, s, dh) = (batch.batch_size, batch.seq_len, cfg.head_dim());
        let p: Vec<NodeId> = self.params.iter().map(|t| graph.leaf(t)).collect();
        let gates: Vec<NodeId> = gate_values
            .iter()
            .map(|&v| graph.leaf(&Tensor::scalar(v).with_requires_grad(true)))
            .collect();

        let positions: Vec<usize> = (0..b).flat_map(|_| 0..s).collect();
        let tok = graph.embedding_lookup(p[TOK_EMB], batch.token_ids.clone())?;
        let pos = graph.embedding_lookup(p[POS_EMB], positions)?;
        let x = graph.add(tok, pos)?;
        let mut x = self.affine_norm(graph, x, p[EMB_LN_G], p[EMB_LN_B])?;

        let mut bias = Vec::with_capacity(b * s * s);
        for bi in 0..b {
            let keys = &batch.attention[bi * s..(bi + 1) * s];
            for _ in 0..s {
                bias.extend(keys.iter().map(|&k| if k { 0.0 } else { PAD_BIAS }));
            }
        }
        let bias = graph.constant(vec![b * s, s], bias)?;
        let inv_sqrt = 1.0 / (dh as f64).sqrt();

        for l in 0..cfg.num_layers {
            let w = |slot: Slot| p[FIRST_LAYER + l * LAYER_SLOTS.len() + slot as usize];
            let q = self.linear(graph, x, w(Slot::QW), w(Slot::QB))?;
            let k = self.linear(graph, x, w(Slot::KW), w(Slot::KB))?;
            let v = self.linear(graph, x, w(Slot::VW), w(Slot::VB))?;
            let mut heads = Vec::with_capacity(cfg.num_heads);
            for h in 0..cfg.num_heads {
                let qh = graph.slice_last_dim(q, h * dh, dh)?;
                let kh = graph.slice_last_dim(k, h * dh, dh)?;
                let vh = graph.slice_last_dim(v, h * dh, dh)?;
                let scores = graph.block_matmul_bt(qh, kh, b)?;
                let scores = graph.scale(scores, inv_sqrt)?;
                let scores = graph.add(scores, bias)?;
                let probs = graph.softmax_rows(scores)?;
                let ctx = graph.block_matmul(probs, vh, b)?;
                let ctx = graph.multiply(ctx, gates[l * cfg.num_heads + h])?;
                let bit = if mask.is_active(l, h) { 1.0 } else { 0.0 };
                heads.push(graph.scale(ctx, bit)?);
            }
            let cat = graph.concat_last_dim(&heads)?;
            let attn = self.linear(graph, cat, w(Slot::OW), w(Slot::OB))?;
            let res = graph.add(x, attn)?;
            x = self.affine_norm(graph, res, w(Slot::Ln1G), w(Slot::Ln1B))?;

            let hid = self.linear(graph, x, w(Slot::Ff1W), w(Slot::Ff1B))?;
            let hid = graph.gelu(hid)?;
            let out = self.linear(graph, hid, w(Slot::Ff2W), w(Slot::Ff2B))?;
            let res = graph.add(x, out)?;
            x = self.affine_norm(graph, res, w(Slot::Ln2G), w(Slot::Ln2B))?;
        }
        let n = self.params.len();
        let logits = self.linear(graph, x, p[n - 2], p[n - 1])?;
        let logits = graph.reshape(logits, vec![b, s, cfg.num_labels])?;
        Ok(ForwardPass {
            logits,
            params: p,
            gates,
        })
    }

    fn linear(&self, g: &mut Graph, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let y = g.matmul(x, w)?;
        g.add(y, b)
    }

    fn affine_norm(&self, g: &mut Graph, x: NodeId, gamma: NodeId, beta: NodeId) -> Result<NodeId> {
        let n = g.layer_norm_rows(x)?;
        let n = g.multiply(n, gamma)?;
        g.add(n, beta)
    }

    fn check_inputs(&self, batch: &Batch, mask: &HeadMask) -> Result<()> {
        let cfg = &self.config;
        if batch.seq_len > cfg.max_sequence_length {
            return Err(Error::Validation(format!(
                "sequence length {} exceeds maximum {}",
                batch.seq_len, cfg.max_sequence_length
            )));
        }
        if let Some(&bad) = batch.token_ids.iter().find(|&&t| t >= cfg.vocab_size) {
            return Err(Error::Validation(format!(
                "token id {bad} outside vocabulary of {}",
                cfg.vocab_size
            )));
        }
        if mask.layers() != cfg.num_layers || mask.heads() != cfg.num_heads {
            return Err(Error::Validation(format!(
                "mask is {}x{} but model is {}x{}",
                mask.layers(),
                mask.heads(),
                cfg.num_layers,
                cfg.num_heads
            )));
        }
        Ok(())
    }

    /// Logit values `[batch, seq, labels]` without keeping the graph.
    pub fn logits(&self, batch: &Batch, mask: &HeadMask) -> Result<Tensor> {
        let mut g = Graph::new();
        let fp = self.forward(&mut g, batch, mask)?;
        Ok(g.tensor(fp.logits).clone().with_requires_grad(false))
    }

    /// Argmax label ids for the unpadded positions of each sequence.
    pub fn predict(&self, batch: &Batch, mask: &HeadMask) -> Result<Vec<Vec<usize>>> {
        let logits = self.logits(batch, mask)?;
        let c = self.config.num_labels;
        let v = logits.values();
        Ok(batch
            .lengths()
            .iter()
            .enumerate()
            .map(|(bi, &len)| {
                (0..len)
                    .map(|p| {
                        let row = &v[(bi * batch.seq_len + p) * c..(bi * batch.seq_len + p + 1) * c];
                        argmax(row)
                    })
                    .collect()
            })
            .collect())
    }

    /// Forward, loss and backward for one batch. Gradients land in the
    /// parameter and gate tensors; values are unchanged. A batch without
    /// any labelled position contributes all-zero gradients and `None`.
    pub fn backward_batch(&mut self, batch: &Batch, mask: &HeadMask) -> Result<Option<f64>> {
        if batch.live_positions() == 0 {
            self.check_inputs(batch, mask)?;
            for t in self.params.iter_mut().chain(self.gates.iter_mut()) {
                let n = t.numel();
                t.set_grad(vec![0.0; n])?;
            }
            return Ok(None);
        }
        let mut g = Graph::new();
        let fp = self.forward(&mut g, batch, mask)?;
        let loss = g.cross_entropy(fp.logits, &batch.labels)?;
        let value = g.value(loss)[0];
        if !value.is_finite() {
            return Err(Error::Numeric(format!("non-finite loss {value}")));
        }
        g.backward(loss)?;
        for (t, &id) in self
            .params
            .iter_mut()
            .zip(&fp.params)
            .chain(self.gates.iter_mut().zip(&fp.gates))
        {
            let grad = g.grad(id).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; t.numel()]);
            t.set_grad(grad)?;
        }
        Ok(Some(value))
    }

    /// `|∂loss/∂gate|` per head, row-major `layers × heads`, from the most
    /// recent [`backward_batch`](Self::backward_batch).
    pub fn head_gate_grads(&self) -> Result<Vec<f64>> {
        let h = self.config.num_heads;
        self.gates
            .iter()
            .enumerate()
            .map(|(i, t)| {
                t.grad()
                    .map(|g| g[0].abs())
                    .ok_or_else(|| Error::MissingGrad(format!("gate {}", HeadCoord::new(i / h, i % h))))
            })
            .collect()
    }

    pub fn clear_grads(&mut self) {
        for t in self.params.iter_mut().chain(self.gates.iter_mut()) {
            t.clear_grad();
        }
    }
}

enum Init {
    Normal(f64),
    Const(f64),
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::ArchConfig;

    fn tiny() -> EncoderModel {
        let arch = ArchConfig {
            num_layers: 2,
            num_heads: 2,
            model_dim: 8,
            feedforward_dim: 12,
            max_sequence_length: 6,
        };
        EncoderModel::new(ModelConfig::new(&arch, 10, 3, 11)).unwrap()
    }

    fn batch() -> Batch {
        Batch::from_sequences(&[vec![2, 3, 4], vec![5, 6]], &[vec![0, 1, 2], vec![1, 1]], 0, 0).unwrap()
    }

    #[test]
    fn desk_default_builds_with_unit_gates() {
        let cfg = ModelConfig::new(&ArchConfig::default(), 50, 5, 1);
        let m = EncoderModel::new(cfg).unwrap();
        assert_eq!(m.gates().len(), 16);
        assert!(m.gates().iter().all(|g| g.values() == [1.0]));
    }

    #[test]
    fn same_seed_same_parameters() {
        assert_eq!(tiny(), tiny());
    }

    #[test]
    fn oversize_sequence_rejected() {
        let m = tiny();
        let b = Batch::from_sequences(&[vec![2; 7]], &[vec![0; 7]], 0, 0).unwrap();
        assert!(m.logits(&b, &HeadMask::full(2, 2)).is_err());
    }

    #[test]
    fn ignored_batch_gives_zero_gate_grads() {
        let mut m = tiny();
        let mut b = batch();
        b.labels.iter_mut().for_each(|l| *l = crate::autodiff::IGNORE_INDEX);
        assert_eq!(m.backward_batch(&b, &HeadMask::full(2, 2)).unwrap(), None);
        assert_eq!(m.head_gate_grads().unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn gate_grads_require_backward() {
        let m = tiny();
        assert!(matches!(m.head_gate_grads(), Err(Error::MissingGrad(_))));
    }

    #[test]
    fn masked_head_gate_grad_is_exactly_zero() {
        let mut m = tiny();
        let mask = HeadMask::with_pruned(2, 2, &[HeadCoord::new(1, 0)]).unwrap();
        m.backward_batch(&batch(), &mask).unwrap();
        let g = m.head_gate_grads().unwrap();
        assert_eq!(g[2], 0.0);
        assert!(g[0] > 0.0 && g[1] > 0.0 && g[3] > 0.0);
    }

    #[test]
    fn backward_keeps_parameter_values() {
        let mut m = tiny();
        let before = m.params().to_vec();
        m.backward_batch(&batch(), &HeadMask::full(2, 2)).unwrap();
        for (a, b) in before.iter().zip(m.params()) {
            assert_eq!(a.values(), b.values());
        }
    }
}
