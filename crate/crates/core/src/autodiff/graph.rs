use super::kernels;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Label id that [`Graph::cross_entropy`] skips (padding positions).
pub const IGNORE_INDEX: usize = usize::MAX;

/// Variance floor for [`OpKind::LayerNormRows`].
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Handle to a node in one [`Graph`]; indices increase in creation order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Primitive operations the graph can record.
///
/// `Add` and `Multiply` accept a right operand with the same shape, with the
/// shape `[last_dim]` of the left operand (broadcast over rows) or with a single
/// element (broadcast everywhere). The `Block*` ops treat both operands as
/// `blocks` stacked row blocks and multiply them block by block; they carry
/// batched attention.
#[derive(Clone, Debug, PartialEq)]
pub enum OpKind {
    MatMul,
    Add,
    Multiply,
    EmbeddingLookup { ids: Vec<usize> },
    SoftmaxRows,
    LayerNormRows,
    Gelu,
    ConcatLastDim,
    SliceLastDim { start: usize, len: usize },
    Scale(f64),
    BlockMatMul { blocks: usize },
    BlockMatMulTransB { blocks: usize },
    Reshape { shape: Vec<usize> },
    SumAll,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Broadcast {
    Same,
    Row,
    Scalar,
}

#[derive(Debug)]
enum Record {
    Leaf,
    Op { kind: OpKind, inputs: Vec<NodeId> },
    CrossEntropy {
        logits: NodeId,
        probs: Vec<f64>,
        gold: Vec<usize>,
        live: usize,
    },
}

#[derive(Debug)]
struct Node {
    tensor: Tensor,
    record: Record,
}

/// Define-by-run computation graph. Nodes are appended in topological order,
/// so backward is a single reverse sweep.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Copies `tensor` into the graph as a leaf. Its gradient slot starts empty.
    pub fn leaf(&mut self, tensor: &Tensor) -> NodeId {
        let mut t = tensor.clone();
        t.clear_grad();
        self.push(t, Record::Leaf)
    }

    pub fn constant(&mut self, shape: Vec<usize>, values: Vec<f64>) -> Result<NodeId> {
        let t = Tensor::new(shape, values)?;
        Ok(self.push(t, Record::Leaf))
    }

    pub fn tensor(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].tensor
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        self.nodes[id.0].tensor.values()
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        self.nodes[id.0].tensor.shape()
    }

    pub fn grad(&self, id: NodeId) -> Option<&[f64]> {
        self.nodes[id.0].tensor.grad()
    }

    fn push(&mut self, tensor: Tensor, record: Record) -> NodeId {
        self.nodes.push(Node { tensor, record });
        NodeId(self.nodes.len() - 1)
    }

    fn t(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].tensor
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(OpKind::MatMul, &[a, b])
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Add, &[a, b])
    }

    pub fn multiply(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Multiply, &[a, b])
    }

    pub fn embedding_lookup(&mut self, table: NodeId, ids: Vec<usize>) -> Result<NodeId> {
        self.apply(OpKind::EmbeddingLookup { ids }, &[table])
    }

    pub fn softmax_rows(&mut self, x: NodeId) -> Result<NodeId> {
        self.apply(OpKind::SoftmaxRows, &[x])
    }

    pub fn layer_norm_rows(&mut self, x: NodeId) -> Result<NodeId> {
        self.apply(OpKind::LayerNormRows, &[x])
    }

    pub fn gelu(&mut self, x: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Gelu, &[x])
    }

    pub fn concat_last_dim(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        self.apply(OpKind::ConcatLastDim, parts)
    }

    pub fn slice_last_dim(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        self.apply(OpKind::SliceLastDim { start, len }, &[x])
    }

    pub fn scale(&mut self, x: NodeId, factor: f64) -> Result<NodeId> {
        self.apply(OpKind::Scale(factor), &[x])
    }

    pub fn block_matmul(&mut self, a: NodeId, b: NodeId, blocks: usize) -> Result<NodeId> {
        self.apply(OpKind::BlockMatMul { blocks }, &[a, b])
    }

    pub fn block_matmul_bt(&mut self, a: NodeId, b: NodeId, blocks: usize) -> Result<NodeId> {
        self.apply(OpKind::BlockMatMulTransB { blocks }, &[a, b])
    }

    pub fn reshape(&mut self, x: NodeId, shape: Vec<usize>) -> Result<NodeId> {
        self.apply(OpKind::Reshape { shape }, &[x])
    }

    pub fn sum_all(&mut self, x: NodeId) -> Result<NodeId> {
        self.apply(OpKind::SumAll, &[x])
    }

    /// Records one primitive and returns its output node.
    pub fn apply(&mut self, kind: OpKind, inputs: &[NodeId]) -> Result<NodeId> {
        let requires_grad = inputs.iter().any(|&i| self.t(i).requires_grad());
        let out = self.forward(&kind, inputs)?.with_requires_grad(requires_grad);
        Ok(self.push(
            out,
            Record::Op {
                kind,
                inputs: inputs.to_vec(),
            },
        ))
    }

    fn arity(kind: &OpKind, inputs: &[NodeId], n: usize) -> Result<()> {
        if inputs.len() != n {
            return Err(Error::shape(
                op_name(kind),
                format!("expected {n} inputs, got {}", inputs.len()),
            ));
        }
        Ok(())
    }

    fn broadcast(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<Broadcast> {
        let (ta, tb) = (self.t(a), self.t(b));
        if ta.shape() == tb.shape() {
            Ok(Broadcast::Same)
        } else if tb.numel() == 1 {
            Ok(Broadcast::Scalar)
        } else if tb.shape().len() == 1 && tb.shape()[0] == ta.last_dim() {
            Ok(Broadcast::Row)
        } else {
            Err(Error::shape(
                op,
                format!("cannot broadcast {:?} onto {:?}", tb.shape(), ta.shape()),
            ))
        }
    }

    fn forward(&self, kind: &OpKind, inputs: &[NodeId]) -> Result<Tensor> {
        let name = op_name(kind);
        match kind {
            OpKind::MatMul => {
                Self::arity(kind, inputs, 2)?;
                let (a, b) = (self.t(inputs[0]), self.t(inputs[1]));
                let (m, k) = dims2(name, a)?;
                let (k2, n) = dims2(name, b)?;
                if k != k2 {
                    return Err(Error::shape(
                        name,
                        format!("inner dimensions differ: [{m}x{k}] · [{k2}x{n}]"),
                    ));
                }
                let mut out = vec![0.0; m * n];
                kernels::matmul_acc(&mut out, a.values(), b.values(), m, k, n);
                Tensor::new(vec![m, n], out)
            }
            OpKind::Add | OpKind::Multiply => {
                Self::arity(kind, inputs, 2)?;
                let mode = self.broadcast(name, inputs[0], inputs[1])?;
                let (a, b) = (self.t(inputs[0]), self.t(inputs[1]));
                let cols = a.last_dim();
                let bv = b.values();
                let f: fn(f64, f64) -> f64 = if matches!(kind, OpKind::Add) {
                    |x, y| x + y
                } else {
                    |x, y| x * y
                };
                let out = a
                    .values()
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| f(x, bv[broadcast_index(mode, i, cols)]))
                    .collect();
                Tensor::new(a.shape().to_vec(), out)
            }
            OpKind::EmbeddingLookup { ids } => {
                Self::arity(kind, inputs, 1)?;
                let table = self.t(inputs[0]);
                let (vocab, dim) = dims2(name, table)?;
                let mut out = Vec::with_capacity(ids.len() * dim);
                for &id in ids {
                    if id >= vocab {
                        return Err(Error::shape(
                            name,
                            format!("id {id} out of range for table with {vocab} rows"),
                        ));
                    }
                    out.extend_from_slice(&table.values()[id * dim..(id + 1) * dim]);
                }
                Tensor::new(vec![ids.len(), dim], out)
            }
            OpKind::SoftmaxRows => {
                Self::arity(kind, inputs, 1)?;
                let x = self.t(inputs[0]);
                let cols = x.last_dim();
                let mut out = vec![0.0; x.numel()];
                for (row, o) in x.values().chunks(cols).zip(out.chunks_mut(cols)) {
                    kernels::softmax_row(row, o);
                }
                Tensor::new(x.shape().to_vec(), out)
            }
            OpKind::LayerNormRows => {
                Self::arity(kind, inputs, 1)?;
                let x = self.t(inputs[0]);
                let cols = x.last_dim();
                let mut out = vec![0.0; x.numel()];
                for (row, o) in x.values().chunks(cols).zip(out.chunks_mut(cols)) {
                    let (mean, inv_std) = row_stats(row);
                    for (o, &v) in o.iter_mut().zip(row) {
                        *o = (v - mean) * inv_std;
                    }
                }
                Tensor::new(x.shape().to_vec(), out)
            }
            OpKind::Gelu => {
                Self::arity(kind, inputs, 1)?;
                let x = self.t(inputs[0]);
                Tensor::new(
                    x.shape().to_vec(),
                    x.values().iter().map(|&v| kernels::gelu(v)).collect(),
                )
            }
            OpKind::ConcatLastDim => {
                if inputs.is_empty() {
                    return Err(Error::shape(name, "no inputs"));
                }
                let rows = self.t(inputs[0]).rows();
                let lead = self.t(inputs[0]).shape()[..self.t(inputs[0]).shape().len() - 1].to_vec();
                let mut total = 0;
                for &i in inputs {
                    let t = self.t(i);
                    if t.rows() != rows || t.shape()[..t.shape().len() - 1] != lead[..] {
                        return Err(Error::shape(
                            name,
                            format!("leading dims {:?} differ from {:?}", t.shape(), lead),
                        ));
                    }
                    total += t.last_dim();
                }
                let mut out = Vec::with_capacity(rows * total);
                for r in 0..rows {
                    for &i in inputs {
                        let t = self.t(i);
                        let c = t.last_dim();
                        out.extend_from_slice(&t.values()[r * c..(r + 1) * c]);
                    }
                }
                let mut shape = lead;
                shape.push(total);
                Tensor::new(shape, out)
            }
            OpKind::SliceLastDim { start, len } => {
                Self::arity(kind, inputs, 1)?;
                let x = self.t(inputs[0]);
                let cols = x.last_dim();
                if start + len > cols || *len == 0 {
                    return Err(Error::shape(
                        name,
                        format!("slice [{start}, {}) outside last dim {cols}", start + len),
                    ));
                }
                let mut out = Vec::with_capacity(x.rows() * len);
                for row in x.values().chunks(cols) {
                    out.extend_from_slice(&row[*start..start + len]);
                }
                let mut shape = x.shape().to_vec();
                *shape.last_mut().unwrap() = *len;
                Tensor::new(shape, out)
            }
            OpKind::Scale(s) => {
                Self::arity(kind, inputs, 1)?;
                let x = self.t(inputs[0]);
                Tensor::new(x.shape().to_vec(), x.values().iter().map(|v| v * s).collect())
            }
            OpKind::BlockMatMul { blocks } => {
                Self::arity(kind, inputs, 2)?;
                let (a, b) = (self.t(inputs[0]), self.t(inputs[1]));
                let (m, n, k) = block_dims(name, *blocks, a, b, false)?;
                let mut out = vec![0.0; blocks * m * k];
                for blk in 0..*blocks {
                    kernels::matmul_acc(
                        &mut out[blk * m * k..(blk + 1) * m * k],
                        &a.values()[blk * m * n..(blk + 1) * m * n],
                        &b.values()[blk * n * k..(blk + 1) * n * k],
                        m,
                        n,
                        k,
                    );
                }
                Tensor::new(vec![blocks * m, k], out)
            }
            OpKind::BlockMatMulTransB { blocks } => {
                Self::arity(kind, inputs, 2)?;
                let (a, b) = (self.t(inputs[0]), self.t(inputs[1]));
                let (m, n, k) = block_dims(name, *blocks, a, b, true)?;
                let mut out = vec![0.0; blocks * m * n];
                for blk in 0..*blocks {
                    kernels::matmul_bt_acc(
                        &mut out[blk * m * n..(blk + 1) * m * n],
                        &a.values()[blk * m * k..(blk + 1) * m * k],
                        &b.values()[blk * n * k..(blk + 1) * n * k],
                        m,
                        k,
                        n,
                    );
                }
                Tensor::new(vec![blocks * m, n], out)
            }
            OpKind::Reshape { shape } => {
                Self::arity(kind, inputs, 1)?;
                let x = self.t(inputs[0]);
                if shape.iter().product::<usize>() != x.numel() {
                    return Err(Error::shape(
                        name,
                        format!("cannot view {:?} as {shape:?}", x.shape()),
                    ));
                }
                Tensor::new(shape.clone(), x.values().to_vec())
            }
            OpKind::SumAll => {
                Self::arity(kind, inputs, 1)?;
                Ok(Tensor::scalar(self.t(inputs[0]).values().iter().sum()))
            }
        }
    }

    /// Mean negative log-likelihood over positions whose gold id is not
    /// [`IGNORE_INDEX`]. `logits` is viewed as `[positions, labels]`.
    pub fn cross_entropy(&mut self, logits: NodeId, gold: &[usize]) -> Result<NodeId> {
        let t = self.t(logits);
        let labels = t.last_dim();
        if t.rows() != gold.len() {
            return Err(Error::shape(
                "cross_entropy",
                format!("{} logit rows for {} gold ids", t.rows(), gold.len()),
            ));
        }
        let mut probs = vec![0.0; t.numel()];
        let mut total = 0.0;
        let mut live = 0usize;
        for (r, &g) in gold.iter().enumerate() {
            if g == IGNORE_INDEX {
                continue;
            }
            if g >= labels {
                return Err(Error::shape(
                    "cross_entropy",
                    format!("gold id {g} at position {r} outside {labels} labels"),
                ));
            }
            let row = &t.values()[r * labels..(r + 1) * labels];
            let p = &mut probs[r * labels..(r + 1) * labels];
            kernels::softmax_row(row, p);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let log_sum = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
            total += log_sum - row[g];
            live += 1;
        }
        if live == 0 {
            return Err(Error::EmptyLossSupport);
        }
        let out = Tensor::scalar(total / live as f64).with_requires_grad(t.requires_grad());
        Ok(self.push(
            out,
            Record::CrossEntropy {
                logits,
                probs,
                gold: gold.to_vec(),
                live,
            },
        ))
    }

    /// Populates gradients of every node that `loss` depends on and that
    /// requires them. Values are never touched.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        let shape = self.t(loss).shape().to_vec();
        if self.t(loss).numel() != 1 {
            return Err(Error::NonScalarLoss(shape));
        }
        for node in &mut self.nodes {
            node.tensor.clear_grad();
        }
        if !self.t(loss).requires_grad() {
            return Ok(());
        }
        self.nodes[loss.0].tensor.set_grad(vec![1.0])?;
        for idx in (0..=loss.0).rev() {
            let Some(g) = self.nodes[idx].tensor.grad().map(<[f64]>::to_vec) else {
                continue;
            };
            for (input, contribution) in self.local_grads(idx, &g)? {
                if !self.t(input).requires_grad() {
                    continue;
                }
                let acc = self.nodes[input.0].tensor.grad_mut_or_zero();
                for (a, c) in acc.iter_mut().zip(&contribution) {
                    *a += c;
                }
            }
        }
        Ok(())
    }

    fn local_grads(&self, idx: usize, g: &[f64]) -> Result<Vec<(NodeId, Vec<f64>)>> {
        let node = &self.nodes[idx];
        let (kind, inputs) = match &node.record {
            Record::Leaf => return Ok(Vec::new()),
            Record::CrossEntropy {
                logits,
                probs,
                gold,
                live,
            } => {
                let labels = self.t(*logits).last_dim();
                let scale = g[0] / *live as f64;
                let mut d = vec![0.0; probs.len()];
                for (r, &gi) in gold.iter().enumerate() {
                    if gi == IGNORE_INDEX {
                        continue;
                    }
                    for c in 0..labels {
                        let onehot = if c == gi { 1.0 } else { 0.0 };
                        d[r * labels + c] = scale * (probs[r * labels + c] - onehot);
                    }
                }
                return Ok(vec![(*logits, d)]);
            }
            Record::Op { kind, inputs } => (kind, inputs),
        };
        let out = &node.tensor;
        let name = op_name(kind);
        let grads = match kind {
            OpKind::MatMul => {
                let (a, b) = (self.t(inputs[0]), self.t(inputs[1]));
                let (m, k) = dims2(name, a)?;
                let n = b.last_dim();
                let mut da = vec![0.0; m * k];
                kernels::matmul_bt_acc(&mut da, g, b.values(), m, n, k);
                let mut db = vec![0.0; k * n];
                kernels::matmul_at_acc(&mut db, a.values(), g, m, k, n);
                vec![(inputs[0], da), (inputs[1], db)]
            }
            OpKind::Add | OpKind::Multiply => {
                let mode = self.broadcast(name, inputs[0], inputs[1])?;
                let (a, b) = (self.t(inputs[0]), self.t(inputs[1]));
                let cols = a.last_dim();
                let mut db = vec![0.0; b.numel()];
                let da = if matches!(kind, OpKind::Add) {
                    for (i, &gi) in g.iter().enumerate() {
                        db[broadcast_index(mode, i, cols)] += gi;
                    }
                    g.to_vec()
                } else {
                    let (av, bv) = (a.values(), b.values());
                    let mut da = vec![0.0; a.numel()];
                    for (i, &gi) in g.iter().enumerate() {
                        let j = broadcast_index(mode, i, cols);
                        da[i] = gi * bv[j];
                        db[j] += gi * av[i];
                    }
                    da
                };
                vec![(inputs[0], da), (inputs[1], db)]
            }
            OpKind::EmbeddingLookup { ids } => {
                let table = self.t(inputs[0]);
                let dim = table.last_dim();
                let mut d = vec![0.0; table.numel()];
                for (r, &id) in ids.iter().enumerate() {
                    for c in 0..dim {
                        d[id * dim + c] += g[r * dim + c];
                    }
                }
                vec![(inputs[0], d)]
            }
            OpKind::SoftmaxRows => {
                let cols = out.last_dim();
                let mut d = vec![0.0; out.numel()];
                for ((y, gr), dr) in out
                    .values()
                    .chunks(cols)
                    .zip(g.chunks(cols))
                    .zip(d.chunks_mut(cols))
                {
                    let dot: f64 = y.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for ((dv, &yv), &gv) in dr.iter_mut().zip(y).zip(gr) {
                        *dv = yv * (gv - dot);
                    }
                }
                vec![(inputs[0], d)]
            }
            OpKind::LayerNormRows => {
                let x = self.t(inputs[0]);
                let cols = x.last_dim();
                let n = cols as f64;
                let mut d = vec![0.0; x.numel()];
                for (((xr, yr), gr), dr) in x
                    .values()
                    .chunks(cols)
                    .zip(out.values().chunks(cols))
                    .zip(g.chunks(cols))
                    .zip(d.chunks_mut(cols))
                {
                    let (_, inv_std) = row_stats(xr);
                    let g_mean = gr.iter().sum::<f64>() / n;
                    let gy_mean = gr.iter().zip(yr).map(|(a, b)| a * b).sum::<f64>() / n;
                    for ((dv, &gv), &yv) in dr.iter_mut().zip(gr).zip(yr) {
                        *dv = inv_std * (gv - g_mean - yv * gy_mean);
                    }
                }
                vec![(inputs[0], d)]
            }
            OpKind::Gelu => {
                let x = self.t(inputs[0]);
                let d = x
                    .values()
                    .iter()
                    .zip(g)
                    .map(|(&v, &gv)| gv * kernels::gelu_grad(v))
                    .collect();
                vec![(inputs[0], d)]
            }
            OpKind::ConcatLastDim => {
                let rows = out.rows();
                let total = out.last_dim();
                let mut offset = 0;
                let mut grads = Vec::with_capacity(inputs.len());
                for &i in inputs {
                    let c = self.t(i).last_dim();
                    let mut d = Vec::with_capacity(rows * c);
                    for r in 0..rows {
                        d.extend_from_slice(&g[r * total + offset..r * total + offset + c]);
                    }
                    offset += c;
                    grads.push((i, d));
                }
                grads
            }
            OpKind::SliceLastDim { start, len } => {
                let x = self.t(inputs[0]);
                let cols = x.last_dim();
                let mut d = vec![0.0; x.numel()];
                for (dr, gr) in d.chunks_mut(cols).zip(g.chunks(*len)) {
                    dr[*start..start + len].copy_from_slice(gr);
                }
                vec![(inputs[0], d)]
            }
            OpKind::Scale(s) => vec![(inputs[0], g.iter().map(|v| v * s).collect())],
            OpKind::BlockMatMul { blocks } => {
                let (a, b) = (self.t(inputs[0]), self.t(inputs[1]));
                let (m, n, k) = block_dims(name, *blocks, a, b, false)?;
                let mut da = vec![0.0; a.numel()];
                let mut db = vec![0.0; b.numel()];
                for blk in 0..*blocks {
                    let gb = &g[blk * m * k..(blk + 1) * m * k];
                    let ab = &a.values()[blk * m * n..(blk + 1) * m * n];
                    let bb = &b.values()[blk * n * k..(blk + 1) * n * k];
                    kernels::matmul_bt_acc(&mut da[blk * m * n..(blk + 1) * m * n], gb, bb, m, k, n);
                    kernels::matmul_at_acc(&mut db[blk * n * k..(blk + 1) * n * k], ab, gb, m, n, k);
                }
                vec![(inputs[0], da), (inputs[1], db)]
            }
            OpKind::BlockMatMulTransB { blocks } => {
                let (a, b) = (self.t(inputs[0]), self.t(inputs[1]));
                let (m, n, k) = block_dims(name, *blocks, a, b, true)?;
                let mut da = vec![0.0; a.numel()];
                let mut db = vec![0.0; b.numel()];
                for blk in 0..*blocks {
                    let gb = &g[blk * m * n..(blk + 1) * m * n];
                    let ab = &a.values()[blk * m * k..(blk + 1) * m * k];
                    let bb = &b.values()[blk * n * k..(blk + 1) * n * k];
                    kernels::matmul_acc(&mut da[blk * m * k..(blk + 1) * m * k], gb, bb, m, n, k);
                    kernels::matmul_at_acc(&mut db[blk * n * k..(blk + 1) * n * k], gb, ab, m, n, k);
                }
                vec![(inputs[0], da), (inputs[1], db)]
            }
            OpKind::Reshape { .. } => vec![(inputs[0], g.to_vec())],
            OpKind::SumAll => {
                let n = self.t(inputs[0]).numel();
                vec![(inputs[0], vec![g[0]; n])]
            }
        };
        Ok(grads)
    }
}

fn op_name(kind: &OpKind) -> &'static str {
    match kind {
        OpKind::MatMul => "matmul",
        OpKind::Add => "add",
        OpKind::Multiply => "multiply",
        OpKind::EmbeddingLookup { .. } => "embedding_lookup",
        OpKind::SoftmaxRows => "softmax_rows",
        OpKind::LayerNormRows => "layer_norm_rows",
        OpKind::Gelu => "gelu",
        OpKind::ConcatLastDim => "concat_last_dim",
        OpKind::SliceLastDim { .. } => "slice_last_dim",
        OpKind::Scale(_) => "scale",
        OpKind::BlockMatMul { .. } => "block_matmul",
        OpKind::BlockMatMulTransB { .. } => "block_matmul_bt",
        OpKind::Reshape { .. } => "reshape",
        OpKind::SumAll => "sum_all",
    }
}

fn broadcast_index(mode: Broadcast, i: usize, cols: usize) -> usize {
    match mode {
        Broadcast::Same => i,
        Broadcast::Row => i % cols,
        Broadcast::Scalar => 0,
    }
}

fn dims2(op: &'static str, t: &Tensor) -> Result<(usize, usize)> {
    match t.shape() {
        [r, c] => Ok((*r, *c)),
        s => Err(Error::shape(op, format!("expected a matrix, got shape {s:?}"))),
    }
}

/// Returns `(m, n, k)`. Plain: `a` is `[blocks·m × n]`, `b` is `[blocks·n × k]`.
/// Transposed: `a` is `[blocks·m × k]`, `b` is `[blocks·n × k]`.
fn block_dims(
    op: &'static str,
    blocks: usize,
    a: &Tensor,
    b: &Tensor,
    transposed: bool,
) -> Result<(usize, usize, usize)> {
    let (ra, ca) = dims2(op, a)?;
    let (rb, cb) = dims2(op, b)?;
    if blocks == 0 || ra % blocks != 0 || rb % blocks != 0 {
        return Err(Error::shape(
            op,
            format!("row counts {ra} and {rb} not divisible into {blocks} blocks"),
        ));
    }
    let (m, n) = (ra / blocks, rb / blocks);
    if transposed {
        if ca != cb {
            return Err(Error::shape(op, format!("column counts differ: {ca} vs {cb}")));
        }
        Ok((m, n, ca))
    } else {
        if ca != n {
            return Err(Error::shape(
                op,
                format!("left block width {ca} differs from right block height {n}"),
            ));
        }
        Ok((m, n, cb))
    }
}

fn row_stats(row: &[f64]) -> (f64, f64) {
    let n = row.len() as f64;
    let mean = row.iter().sum::<f64>() / n;
    let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, 1.0 / (var + LAYER_NORM_EPS).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn param(g: &mut Graph, shape: Vec<usize>, v: Vec<f64>) -> NodeId {
        g.leaf(&Tensor::param(shape, v).unwrap())
    }

    #[test]
    fn identity_matmul() {
        let mut g = Graph::new();
        let i = g.constant(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let b = g.constant(vec![2, 2], vec![3.0, 4.0, 5.0, 6.0]).unwrap();
        let c = g.matmul(i, b).unwrap();
        assert_eq!(g.value(c), &[3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn matmul_shape_error_names_op() {
        let mut g = Graph::new();
        let a = g.constant(vec![2, 3], vec![0.0; 6]).unwrap();
        let b = g.constant(vec![2, 2], vec![0.0; 4]).unwrap();
        let err = g.matmul(a, b).unwrap_err().to_string();
        assert!(err.starts_with("matmul"), "{err}");
        assert!(err.contains("[2x3]"), "{err}");
    }

    #[test]
    fn softmax_of_zero_row_is_uniform() {
        let mut g = Graph::new();
        let x = g.constant(vec![1, 2], vec![0.0, 0.0]).unwrap();
        let y = g.softmax_rows(x).unwrap();
        assert_eq!(g.value(y), &[0.5, 0.5]);
    }

    #[test]
    fn layer_norm_hand_case() {
        let mut g = Graph::new();
        let x = g.constant(vec![1, 2], vec![1.0, 3.0]).unwrap();
        let y = g.layer_norm_rows(x).unwrap();
        for (got, want) in g.value(y).iter().zip([-1.0, 1.0]) {
            assert!((got - want).abs() < 1e-5);
        }
    }

    #[test]
    fn cross_entropy_closed_forms() {
        let mut g = Graph::new();
        let x = g.constant(vec![1, 4], vec![0.0; 4]).unwrap();
        let l = g.cross_entropy(x, &[2]).unwrap();
        assert!((g.value(l)[0] - 4f64.ln()).abs() < 1e-12);

        let x = g.constant(vec![2, 2], vec![5.0, -3.0, 0.0, 0.0]).unwrap();
        let l = g.cross_entropy(x, &[IGNORE_INDEX, 1]).unwrap();
        assert!((g.value(l)[0] - 2f64.ln()).abs() < 1e-12);

        let x = g.constant(vec![2, 3], vec![800.0, 0.0, 0.0, 0.0, 0.0, 800.0]).unwrap();
        let l = g.cross_entropy(x, &[0, 2]).unwrap();
        assert_eq!(g.value(l)[0], 0.0);

        let x = g.constant(vec![2, 2], vec![0.0; 4]).unwrap();
        assert!(matches!(
            g.cross_entropy(x, &[IGNORE_INDEX, IGNORE_INDEX]),
            Err(Error::EmptyLossSupport)
        ));
    }

    #[test]
    fn sum_gradient_is_ones() {
        let mut g = Graph::new();
        let x = param(&mut g, vec![3], vec![1.0, -2.0, 0.5]);
        let s = g.sum_all(x).unwrap();
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn square_gradient_accumulates_fan_out() {
        let mut g = Graph::new();
        let x = param(&mut g, vec![2], vec![1.0, 2.0]);
        let sq = g.multiply(x, x).unwrap();
        let s = g.sum_all(sq).unwrap();
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[2.0, 4.0]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut g = Graph::new();
        let x = param(&mut g, vec![2], vec![1.0, 2.0]);
        assert!(matches!(g.backward(x), Err(Error::NonScalarLoss(_))));
    }

    #[test]
    fn backward_leaves_values_untouched() {
        let mut g = Graph::new();
        let x = param(&mut g, vec![2, 3], vec![0.1, -0.4, 0.3, 0.9, 0.2, -0.7]);
        let w = param(&mut g, vec![3, 2], vec![0.5, -0.1, 0.2, 0.3, -0.6, 0.8]);
        let h = g.matmul(x, w).unwrap();
        let h = g.gelu(h).unwrap();
        let p = g.softmax_rows(h).unwrap();
        let l = g.cross_entropy(p, &[0, 1]).unwrap();
        let before: Vec<Vec<f64>> = (0..g.len()).map(|i| g.value(NodeId(i)).to_vec()).collect();
        g.backward(l).unwrap();
        for (i, b) in before.iter().enumerate() {
            assert_eq!(g.value(NodeId(i)), &b[..]);
        }
    }

    #[test]
    fn broadcast_forms() {
        let mut g = Graph::new();
        let a = param(&mut g, vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]);
        let row = param(&mut g, vec![2], vec![10.0, 20.0]);
        let s = param(&mut g, vec![1], vec![3.0]);
        let r = g.add(a, row).unwrap();
        assert_eq!(g.value(r), &[11.0, 22.0, 13.0, 24.0]);
        let m = g.multiply(a, s).unwrap();
        assert_eq!(g.value(m), &[3.0, 6.0, 9.0, 12.0]);
        let total = g.sum_all(m).unwrap();
        g.backward(total).unwrap();
        assert_eq!(g.grad(s).unwrap(), &[10.0]);
        let bad = g.constant(vec![3], vec![0.0; 3]).unwrap();
        assert!(g.add(a, bad).is_err());
    }
}
