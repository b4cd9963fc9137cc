//! Tape-based reverse-mode autodiff.
//!
//! Forward ops append nodes to an arena in topological order and save whatever
//! activations the backward rule needs. `backward` walks the arena in exact
//! reverse order, accumulating gradients into every node; trainable leaves are
//! read out afterwards. Every op validates shapes up front and rejects
//! non-finite outputs so NaNs fail loudly at the op that produced them.

use crate::tensor::Tensor2;
use crate::{NnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

struct Node {
    value: Tensor2,
    op: Op,
}

enum Op {
    Leaf,
    Matmul(NodeId, NodeId),
    /// n x d plus a 1 x d row broadcast over every row.
    AddBias(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Hadamard(NodeId, NodeId),
    Scale(NodeId, f64),
    Relu(NodeId),
    LayerNorm {
        input: NodeId,
        inv_std: Vec<f64>,
    },
    SoftmaxRows(NodeId),
    /// Multi-head scaled dot-product attention; per-head softmax weights are
    /// saved for the backward pass. Output is the concatenation of heads.
    Attention {
        q: NodeId,
        k: NodeId,
        v: NodeId,
        heads: usize,
        weights: Vec<Tensor2>,
    },
    MeanRows(NodeId),
    RepeatRows {
        input: NodeId,
        count: usize,
    },
    ConcatRows(NodeId, NodeId),
    ConcatCols(NodeId, NodeId),
    SliceRow {
        input: NodeId,
        row: usize,
    },
    SumAll(NodeId),
    MeanAll(NodeId),
    Sigmoid(NodeId),
    Mse(NodeId, NodeId),
    BceWithLogits {
        logits: NodeId,
        targets: Tensor2,
    },
    /// Mean Euclidean distance over consecutive (x, y) pairs of a 1 x 2H row
    /// against a constant target row. Used for displacement losses.
    MeanPointDist {
        input: NodeId,
        target: Tensor2,
    },
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Per-node gradients produced by `Tape::backward`.
pub struct Gradients {
    grads: Vec<Option<Tensor2>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Tensor2> {
        self.grads[id.0].as_ref()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor2 {
        &self.nodes[id.0].value
    }

    /// Constant input leaf.
    pub fn leaf(&mut self, value: Tensor2) -> NodeId {
        self.push_unchecked(value, Op::Leaf)
    }

    /// Trainable leaf. Same mechanics as `leaf`; the name marks intent at the
    /// call site, and callers read its gradient back after `backward`.
    pub fn param(&mut self, value: Tensor2) -> NodeId {
        self.push_unchecked(value, Op::Leaf)
    }

    fn push_unchecked(&mut self, value: Tensor2, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    fn push(&mut self, opname: &'static str, value: Tensor2, op: Op) -> Result<NodeId> {
        if !value.is_finite() {
            return Err(NnError::NonFinite { op: opname });
        }
        Ok(self.push_unchecked(value, op))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.value(a).matmul(self.value(b))?;
        self.push("matmul", value, Op::Matmul(a, b))
    }

    pub fn add_bias(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId> {
        let (x, b) = (self.value(a), self.value(bias));
        if b.rows() != 1 || b.cols() != x.cols() {
            return Err(NnError::ShapeMismatch {
                op: "add_bias",
                expected: format!("1x{}", x.cols()),
                got: format!("{:?}", b.shape()),
            });
        }
        let mut out = x.clone();
        for r in 0..out.rows() {
            for c in 0..out.cols() {
                let v = out.get(r, c) + b.get(0, c);
                out.set(r, c, v);
            }
        }
        self.push("add_bias", out, Op::AddBias(a, bias))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.value(a).add(self.value(b))?;
        self.push("add", value, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.value(a).sub(self.value(b))?;
        self.push("sub", value, Op::Sub(a, b))
    }

    pub fn hadamard(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.value(a).hadamard(self.value(b))?;
        self.push("hadamard", value, Op::Hadamard(a, b))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        let value = self.value(a).scale(c);
        self.push("scale", value, Op::Scale(a, c))
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        let value = self.value(a).map(|v| v.max(0.0));
        self.push("relu", value, Op::Relu(a))
    }

    /// Per-row normalization to zero mean / unit variance (no affine part).
    pub fn layer_norm(&mut self, a: NodeId) -> Result<NodeId> {
        const EPS: f64 = 1e-9;
        let x = self.value(a);
        let (n, d) = x.shape();
        let mut out = Tensor2::zeros(n, d);
        let mut inv_std = Vec::with_capacity(n);
        for r in 0..n {
            let row = x.row(r);
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let is = 1.0 / (var + EPS).sqrt();
            inv_std.push(is);
            for c in 0..d {
                out.set(r, c, (row[c] - mean) * is);
            }
        }
        self.push("layer_norm", out, Op::LayerNorm { input: a, inv_std })
    }

    pub fn softmax_rows(&mut self, a: NodeId) -> Result<NodeId> {
        let value = softmax_rows_value(self.value(a));
        self.push("softmax_rows", value, Op::SoftmaxRows(a))
    }

    /// Multi-head scaled dot-product attention. Q is n_q x d, K and V are
    /// n_k x d, d divisible by `heads`. Per head: softmax(QK^T / sqrt(d_h)) V;
    /// heads are concatenated along columns. Any output projection is the
    /// caller's matmul.
    pub fn scaled_dot_attention(
        &mut self,
        q: NodeId,
        k: NodeId,
        v: NodeId,
        heads: usize,
    ) -> Result<NodeId> {
        let (qt, kt, vt) = (self.value(q), self.value(k), self.value(v));
        let d = qt.cols();
        if heads == 0 || d % heads != 0 || kt.cols() != d || vt.cols() != d {
            return Err(NnError::ShapeMismatch {
                op: "scaled_dot_attention",
                expected: format!("q/k/v width divisible by {heads} heads"),
                got: format!("q {:?} k {:?} v {:?}", qt.shape(), kt.shape(), vt.shape()),
            });
        }
        if kt.rows() != vt.rows() {
            return Err(NnError::ShapeMismatch {
                op: "scaled_dot_attention",
                expected: format!("k rows == v rows ({})", kt.rows()),
                got: format!("{}", vt.rows()),
            });
        }
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let (nq, nk) = (qt.rows(), kt.rows());
        let mut out = Tensor2::zeros(nq, d);
        let mut weights = Vec::with_capacity(heads);
        for h in 0..heads {
            let off = h * dh;
            // scores = Qh Kh^T * scale
            let mut scores = Tensor2::zeros(nq, nk);
            for i in 0..nq {
                for j in 0..nk {
                    let mut dot = 0.0;
                    for c in 0..dh {
                        dot += qt.get(i, off + c) * kt.get(j, off + c);
                    }
                    scores.set(i, j, dot * scale);
                }
            }
            let attn = softmax_rows_value(&scores);
            for i in 0..nq {
                for c in 0..dh {
                    let mut acc = 0.0;
                    for j in 0..nk {
                        acc += attn.get(i, j) * vt.get(j, off + c);
                    }
                    out.set(i, off + c, acc);
                }
            }
            weights.push(attn);
        }
        self.push(
            "scaled_dot_attention",
            out,
            Op::Attention {
                q,
                k,
                v,
                heads,
                weights,
            },
        )
    }

    /// Saved per-head softmax weights of an attention node (rows sum to 1).
    pub fn attention_weights(&self, id: NodeId) -> Option<&[Tensor2]> {
        match &self.nodes[id.0].op {
            Op::Attention { weights, .. } => Some(weights),
            _ => None,
        }
    }

    pub fn mean_rows(&mut self, a: NodeId) -> Result<NodeId> {
        let x = self.value(a);
        let (n, d) = x.shape();
        let mut out = Tensor2::zeros(1, d);
        for r in 0..n {
            for c in 0..d {
                out.set(0, c, out.get(0, c) + x.get(r, c) / n as f64);
            }
        }
        self.push("mean_rows", out, Op::MeanRows(a))
    }

    pub fn repeat_rows(&mut self, a: NodeId, count: usize) -> Result<NodeId> {
        let x = self.value(a);
        if x.rows() != 1 {
            return Err(NnError::ShapeMismatch {
                op: "repeat_rows",
                expected: "1 row".into(),
                got: format!("{}", x.rows()),
            });
        }
        let mut data = Vec::with_capacity(count * x.cols());
        for _ in 0..count {
            data.extend_from_slice(x.row(0));
        }
        let value = Tensor2::from_vec(count, x.cols(), data)?;
        self.push("repeat_rows", value, Op::RepeatRows { input: a, count })
    }

    pub fn concat_rows(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (x, y) = (self.value(a), self.value(b));
        if x.cols() != y.cols() {
            return Err(NnError::ShapeMismatch {
                op: "concat_rows",
                expected: format!("{} cols", x.cols()),
                got: format!("{}", y.cols()),
            });
        }
        let mut data = Vec::with_capacity((x.rows() + y.rows()) * x.cols());
        data.extend_from_slice(x.data());
        data.extend_from_slice(y.data());
        let value = Tensor2::from_vec(x.rows() + y.rows(), x.cols(), data)?;
        self.push("concat_rows", value, Op::ConcatRows(a, b))
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (x, y) = (self.value(a), self.value(b));
        if x.rows() != y.rows() {
            return Err(NnError::ShapeMismatch {
                op: "concat_cols",
                expected: format!("{} rows", x.rows()),
                got: format!("{}", y.rows()),
            });
        }
        let mut data = Vec::with_capacity(x.rows() * (x.cols() + y.cols()));
        for r in 0..x.rows() {
            data.extend_from_slice(x.row(r));
            data.extend_from_slice(y.row(r));
        }
        let value = Tensor2::from_vec(x.rows(), x.cols() + y.cols(), data)?;
        self.push("concat_cols", value, Op::ConcatCols(a, b))
    }

    pub fn slice_row(&mut self, a: NodeId, row: usize) -> Result<NodeId> {
        let x = self.value(a);
        if row >= x.rows() {
            return Err(NnError::ShapeMismatch {
                op: "slice_row",
                expected: format!("row < {}", x.rows()),
                got: format!("{row}"),
            });
        }
        let value = Tensor2::row_vector(x.row(row));
        self.push("slice_row", value, Op::SliceRow { input: a, row })
    }

    pub fn sum_all(&mut self, a: NodeId) -> Result<NodeId> {
        let s: f64 = self.value(a).data().iter().sum();
        self.push("sum_all", Tensor2::scalar(s), Op::SumAll(a))
    }

    pub fn mean_all(&mut self, a: NodeId) -> Result<NodeId> {
        let x = self.value(a);
        let s: f64 = x.data().iter().sum::<f64>() / x.data().len() as f64;
        self.push("mean_all", Tensor2::scalar(s), Op::MeanAll(a))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        let value = self.value(a).map(sigmoid);
        self.push("sigmoid", value, Op::Sigmoid(a))
    }

    /// Mean squared error over all elements, as a scalar node.
    pub fn mse(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(NnError::ShapeMismatch {
                op: "mse",
                expected: format!("{:?}", x.shape()),
                got: format!("{:?}", y.shape()),
            });
        }
        let n = x.data().len() as f64;
        let s: f64 = x
            .data()
            .iter()
            .zip(y.data())
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum();
        self.push("mse", Tensor2::scalar(s / n), Op::Mse(a, b))
    }

    /// Binary cross-entropy from logits against constant targets in [0, 1],
    /// averaged over all elements. Numerically stable form.
    pub fn bce_with_logits(&mut self, logits: NodeId, targets: Tensor2) -> Result<NodeId> {
        let z = self.value(logits);
        if z.shape() != targets.shape() {
            return Err(NnError::ShapeMismatch {
                op: "bce_with_logits",
                expected: format!("{:?}", z.shape()),
                got: format!("{:?}", targets.shape()),
            });
        }
        let n = z.data().len() as f64;
        let s: f64 = z
            .data()
            .iter()
            .zip(targets.data())
            .map(|(&z, &y)| z.max(0.0) - z * y + (-z.abs()).exp().ln_1p())
            .sum();
        self.push(
            "bce_with_logits",
            Tensor2::scalar(s / n),
            Op::BceWithLogits { logits, targets },
        )
    }

    /// Mean Euclidean distance between consecutive (x, y) pairs of a 1 x 2H
    /// row node and a constant target of the same width.
    pub fn mean_point_dist(&mut self, a: NodeId, target: Tensor2) -> Result<NodeId> {
        let x = self.value(a);
        if x.rows() != 1 || !x.cols().is_multiple_of(2) || x.shape() != target.shape() {
            return Err(NnError::ShapeMismatch {
                op: "mean_point_dist",
                expected: "matching 1x2H rows".into(),
                got: format!("{:?} vs {:?}", x.shape(), target.shape()),
            });
        }
        let h = x.cols() / 2;
        let mut s = 0.0;
        for i in 0..h {
            let dx = x.get(0, 2 * i) - target.get(0, 2 * i);
            let dy = x.get(0, 2 * i + 1) - target.get(0, 2 * i + 1);
            s += (dx * dx + dy * dy).sqrt();
        }
        self.push(
            "mean_point_dist",
            Tensor2::scalar(s / h as f64),
            Op::MeanPointDist { input: a, target },
        )
    }

    /// Reverse pass from a scalar loss. Returns gradients for every node that
    /// influences the loss; trainable leaves are the ones callers care about.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.shape() != (1, 1) {
            return Err(NnError::NonScalarLoss {
                rows: lv.rows(),
                cols: lv.cols(),
            });
        }
        let mut grads: Vec<Option<Tensor2>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor2::scalar(1.0));

        for idx in (0..self.nodes.len()).rev() {
            let g = match grads[idx].take() {
                Some(g) => g,
                None => continue,
            };
            if !g.is_finite() {
                return Err(NnError::NonFinite { op: "backward" });
            }
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, idx: usize, g: &Tensor2, grads: &mut [Option<Tensor2>]) {
        let accum = |grads: &mut [Option<Tensor2>], id: NodeId, delta: Tensor2| {
            match &mut grads[id.0] {
                Some(existing) => existing.add_assign(&delta),
                slot @ None => *slot = Some(delta),
            }
        };
        match &self.nodes[idx].op {
            Op::Leaf => {}
            Op::Matmul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                accum(grads, *a, g.matmul(&bv.transpose()).expect("shape"));
                accum(grads, *b, av.transpose().matmul(g).expect("shape"));
            }
            Op::AddBias(a, bias) => {
                accum(grads, *a, g.clone());
                let mut gb = Tensor2::zeros(1, g.cols());
                for r in 0..g.rows() {
                    for c in 0..g.cols() {
                        gb.set(0, c, gb.get(0, c) + g.get(r, c));
                    }
                }
                accum(grads, *bias, gb);
            }
            Op::Add(a, b) => {
                accum(grads, *a, g.clone());
                accum(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                accum(grads, *a, g.clone());
                accum(grads, *b, g.scale(-1.0));
            }
            Op::Hadamard(a, b) => {
                accum(grads, *a, g.hadamard(self.value(*b)).expect("shape"));
                accum(grads, *b, g.hadamard(self.value(*a)).expect("shape"));
            }
            Op::Scale(a, c) => accum(grads, *a, g.scale(*c)),
            Op::Relu(a) => {
                let x = self.value(*a);
                let mut gx = g.clone();
                for (gv, &xv) in gx.data_mut().iter_mut().zip(x.data()) {
                    if xv <= 0.0 {
                        *gv = 0.0;
                    }
                }
                accum(grads, *a, gx);
            }
            Op::LayerNorm { input, inv_std } => {
                let y = &self.nodes[idx].value;
                let (n, d) = y.shape();
                let mut gx = Tensor2::zeros(n, d);
                for r in 0..n {
                    let gr = g.row(r);
                    let yr = y.row(r);
                    let gmean = gr.iter().sum::<f64>() / d as f64;
                    let gymean = gr.iter().zip(yr).map(|(&a, &b)| a * b).sum::<f64>() / d as f64;
                    for c in 0..d {
                        gx.set(r, c, inv_std[r] * (gr[c] - gmean - yr[c] * gymean));
                    }
                }
                accum(grads, *input, gx);
            }
            Op::SoftmaxRows(a) => {
                let s = &self.nodes[idx].value;
                accum(grads, *a, softmax_rows_backward(s, g));
            }
            Op::Attention {
                q,
                k,
                v,
                heads,
                weights,
            } => {
                let (qt, kt, vt) = (self.value(*q), self.value(*k), self.value(*v));
                let d = qt.cols();
                let dh = d / heads;
                let scale = 1.0 / (dh as f64).sqrt();
                let (nq, nk) = (qt.rows(), kt.rows());
                let mut gq = Tensor2::zeros(nq, d);
                let mut gk = Tensor2::zeros(nk, d);
                let mut gv = Tensor2::zeros(nk, d);
                for h in 0..*heads {
                    let off = h * dh;
                    let attn = &weights[h];
                    // d_attn = g_out Vh^T ; d_v = attn^T g_out
                    let mut g_attn = Tensor2::zeros(nq, nk);
                    for i in 0..nq {
                        for j in 0..nk {
                            let mut acc = 0.0;
                            for c in 0..dh {
                                acc += g.get(i, off + c) * vt.get(j, off + c);
                            }
                            g_attn.set(i, j, acc);
                        }
                    }
                    for j in 0..nk {
                        for c in 0..dh {
                            let mut acc = 0.0;
                            for i in 0..nq {
                                acc += attn.get(i, j) * g.get(i, off + c);
                            }
                            gv.set(j, off + c, gv.get(j, off + c) + acc);
                        }
                    }
                    let g_scores = softmax_rows_backward(attn, &g_attn);
                    // scores = scale * Qh Kh^T
                    for i in 0..nq {
                        for c in 0..dh {
                            let mut acc = 0.0;
                            for j in 0..nk {
                                acc += g_scores.get(i, j) * kt.get(j, off + c);
                            }
                            gq.set(i, off + c, gq.get(i, off + c) + acc * scale);
                        }
                    }
                    for j in 0..nk {
                        for c in 0..dh {
                            let mut acc = 0.0;
                            for i in 0..nq {
                                acc += g_scores.get(i, j) * qt.get(i, off + c);
                            }
                            gk.set(j, off + c, gk.get(j, off + c) + acc * scale);
                        }
                    }
                }
                accum(grads, *q, gq);
                accum(grads, *k, gk);
                accum(grads, *v, gv);
            }
            Op::MeanRows(a) => {
                let n = self.value(*a).rows();
                let mut gx = Tensor2::zeros(n, g.cols());
                for r in 0..n {
                    for c in 0..g.cols() {
                        gx.set(r, c, g.get(0, c) / n as f64);
                    }
                }
                accum(grads, *a, gx);
            }
            Op::RepeatRows { input, count } => {
                let mut gx = Tensor2::zeros(1, g.cols());
                for r in 0..*count {
                    for c in 0..g.cols() {
                        gx.set(0, c, gx.get(0, c) + g.get(r, c));
                    }
                }
                accum(grads, *input, gx);
            }
            Op::ConcatRows(a, b) => {
                let na = self.value(*a).rows();
                let cols = g.cols();
                let mut ga = Tensor2::zeros(na, cols);
                let mut gb = Tensor2::zeros(g.rows() - na, cols);
                for r in 0..g.rows() {
                    for c in 0..cols {
                        if r < na {
                            ga.set(r, c, g.get(r, c));
                        } else {
                            gb.set(r - na, c, g.get(r, c));
                        }
                    }
                }
                accum(grads, *a, ga);
                accum(grads, *b, gb);
            }
            Op::ConcatCols(a, b) => {
                let ca = self.value(*a).cols();
                let mut ga = Tensor2::zeros(g.rows(), ca);
                let mut gb = Tensor2::zeros(g.rows(), g.cols() - ca);
                for r in 0..g.rows() {
                    for c in 0..g.cols() {
                        if c < ca {
                            ga.set(r, c, g.get(r, c));
                        } else {
                            gb.set(r, c - ca, g.get(r, c));
                        }
                    }
                }
                accum(grads, *a, ga);
                accum(grads, *b, gb);
            }
            Op::SliceRow { input, row } => {
                let x = self.value(*input);
                let mut gx = Tensor2::zeros(x.rows(), x.cols());
                for c in 0..x.cols() {
                    gx.set(*row, c, g.get(0, c));
                }
                accum(grads, *input, gx);
            }
            Op::SumAll(a) => {
                let x = self.value(*a);
                accum(grads, *a, Tensor2::filled(x.rows(), x.cols(), g.item()));
            }
            Op::MeanAll(a) => {
                let x = self.value(*a);
                let n = x.data().len() as f64;
                accum(grads, *a, Tensor2::filled(x.rows(), x.cols(), g.item() / n));
            }
            Op::Sigmoid(a) => {
                let y = &self.nodes[idx].value;
                let gx = g
                    .hadamard(&y.map(|s| s * (1.0 - s)))
                    .expect("shape");
                accum(grads, *a, gx);
            }
            Op::Mse(a, b) => {
                let (x, y) = (self.value(*a), self.value(*b));
                let n = x.data().len() as f64;
                let diff = x.sub(y).expect("shape").scale(2.0 * g.item() / n);
                accum(grads, *a, diff.clone());
                accum(grads, *b, diff.scale(-1.0));
            }
            Op::BceWithLogits { logits, targets } => {
                let z = self.value(*logits);
                let n = z.data().len() as f64;
                let mut gz = Tensor2::zeros(z.rows(), z.cols());
                for (i, (&zv, &yv)) in z.data().iter().zip(targets.data()).enumerate() {
                    gz.data_mut()[i] = (sigmoid(zv) - yv) * g.item() / n;
                }
                accum(grads, *logits, gz);
            }
            Op::MeanPointDist { input, target } => {
                let x = self.value(*input);
                let h = x.cols() / 2;
                let mut gx = Tensor2::zeros(1, x.cols());
                for i in 0..h {
                    let dx = x.get(0, 2 * i) - target.get(0, 2 * i);
                    let dy = x.get(0, 2 * i + 1) - target.get(0, 2 * i + 1);
                    let d = (dx * dx + dy * dy).sqrt();
                    if d > 1e-12 {
                        gx.set(0, 2 * i, g.item() * dx / (h as f64 * d));
                        gx.set(0, 2 * i + 1, g.item() * dy / (h as f64 * d));
                    }
                }
                accum(grads, *input, gx);
            }
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softmax_rows_value(x: &Tensor2) -> Tensor2 {
    let (n, d) = x.shape();
    let mut out = Tensor2::zeros(n, d);
    for r in 0..n {
        let row = x.row(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for c in 0..d {
            let e = (row[c] - max).exp();
            out.set(r, c, e);
            sum += e;
        }
        for c in 0..d {
            out.set(r, c, out.get(r, c) / sum);
        }
    }
    out
}

/// d(softmax)/dx given the softmax output s and upstream gradient g, per row:
/// gx_i = s_i * (g_i - sum_j g_j s_j).
fn softmax_rows_backward(s: &Tensor2, g: &Tensor2) -> Tensor2 {
    let (n, d) = s.shape();
    let mut gx = Tensor2::zeros(n, d);
    for r in 0..n {
        let sr = s.row(r);
        let gr = g.row(r);
        let dot: f64 = sr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
        for c in 0..d {
            gx.set(r, c, sr[c] * (gr[c] - dot));
        }
    }
    gx
}
