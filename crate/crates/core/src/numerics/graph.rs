//! Tape-based reverse-mode automatic differentiation over [`Tensor`]s.
//!
//! Operations are recorded in creation order on a [`Graph`]; since every
//! node only references earlier nodes, the tape is already topologically
//! sorted and [`Graph::backward`] walks it once from the root down.
//!
//! Besides the elementwise and matrix primitives, the tape has fused nodes
//! for the transformer pieces (RMS norm, rotary embedding, segmented causal
//! attention, token-level negative log-likelihood). Each fused node has a
//! hand-written vector-Jacobian product; all of them are exercised against
//! central finite differences in the tests.
//!
//! A graph supports exactly one backward pass.

use super::kernels::{self, gemm, Lanes};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

/// A contiguous run of rows in a packed batch that forms one sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Segment {
    pub start: usize,
    pub len: usize,
}

const RMS_EPS: f64 = 1e-6;

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul {
        a: NodeId,
        b: NodeId,
    },
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Offset(NodeId),
    Silu(NodeId),
    Softplus(NodeId),
    Sum(NodeId),
    Softmax {
        x: NodeId,
        axis: usize,
    },
    RmsNorm {
        x: NodeId,
        gain: NodeId,
        inv_rms: Vec<f64>,
    },
    Embedding {
        table: NodeId,
        ids: Vec<u32>,
    },
    Rope {
        x: NodeId,
        positions: Vec<usize>,
        head_dim: usize,
        base: f64,
    },
    Attention {
        q: NodeId,
        k: NodeId,
        v: NodeId,
        segments: Vec<Segment>,
        n_heads: usize,
        probs: Vec<f64>,
    },
    SelectRows {
        x: NodeId,
        rows: Vec<usize>,
    },
    TokenNll {
        logits: NodeId,
        targets: Vec<u32>,
        probs: Vec<f64>,
    },
    WeightedSum {
        x: NodeId,
        weights: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Gradients produced by one backward pass, indexed by node.
///
/// Only leaf nodes retain their gradient; intermediate buffers are dropped
/// as soon as they have been propagated.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&[f64]> {
        self.grads.get(id.0).and_then(|g| g.as_deref())
    }

    /// Removes and returns the gradient of `id`, or zeros of length `len`
    /// when the node did not influence the root.
    pub fn take_or_zeros(&mut self, id: NodeId, len: usize) -> Vec<f64> {
        self.grads
            .get_mut(id.0)
            .and_then(Option::take)
            .unwrap_or_else(|| vec![0.0; len])
    }
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    consumed: bool,
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

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Scalar value of a single-element node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        self.value(id).item()
    }

    /// Records an input. Any gradient buffer on `value` is discarded.
    pub fn leaf(&mut self, mut value: Tensor) -> NodeId {
        value.zero_grad();
        self.push(value, Op::Leaf)
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::shape(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    fn map(&mut self, x: NodeId, f: impl Fn(f64) -> f64, op: Op) -> NodeId {
        let src = self.value(x);
        let data = src.data().iter().map(|&v| f(v)).collect();
        let value = Tensor::new(src.shape().to_vec(), data).expect("same shape");
        self.push(value, op)
    }

    fn zip(&mut self, a: NodeId, b: NodeId, f: impl Fn(f64, f64) -> f64, op: Op) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor::new(va.shape().to_vec(), data).expect("same shape");
        self.push(value, op)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul { a, b }))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("add", a, b)?;
        Ok(self.zip(a, b, |x, y| x + y, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("sub", a, b)?;
        Ok(self.zip(a, b, |x, y| x - y, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("mul", a, b)?;
        Ok(self.zip(a, b, |x, y| x * y, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, x: NodeId, factor: f64) -> NodeId {
        self.map(x, |v| v * factor, Op::Scale(x, factor))
    }

    /// Adds a constant to every element.
    pub fn offset(&mut self, x: NodeId, c: f64) -> NodeId {
        self.map(x, |v| v + c, Op::Offset(x))
    }

    pub fn silu(&mut self, x: NodeId) -> NodeId {
        self.map(x, kernels::silu, Op::Silu(x))
    }

    pub fn softplus(&mut self, x: NodeId) -> NodeId {
        self.map(x, kernels::softplus, Op::Softplus(x))
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let s = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    pub fn mean(&mut self, x: NodeId) -> NodeId {
        let n = self.value(x).numel().max(1) as f64;
        let s = self.sum(x);
        self.scale(s, 1.0 / n)
    }

    pub fn softmax(&mut self, x: NodeId, axis: usize) -> Result<NodeId> {
        let v = self.value(x);
        if axis >= v.shape().len() {
            return Err(Error::shape("softmax", format!("axis {axis} for {:?}", v.shape())));
        }
        let data = kernels::softmax_axis(v.shape(), v.data(), axis);
        let out = Tensor::new(v.shape().to_vec(), data)?;
        Ok(self.push(out, Op::Softmax { x, axis }))
    }

    /// Row-wise RMS normalization of a `[n, d]` input with a learned `[d]` gain.
    pub fn rms_norm(&mut self, x: NodeId, gain: NodeId) -> Result<NodeId> {
        let (n, d) = self.value(x).dims2()?;
        if self.value(gain).numel() != d {
            return Err(Error::shape(
                "rms_norm",
                format!("gain {:?} for width {d}", self.value(gain).shape()),
            ));
        }
        let xs = self.value(x).data();
        let g = self.value(gain).data();
        let mut out = vec![0.0; n * d];
        let mut inv_rms = Vec::with_capacity(n);
        for r in 0..n {
            let row = &xs[r * d..(r + 1) * d];
            let ms = row.iter().map(|v| v * v).sum::<f64>() / d as f64;
            let inv = 1.0 / (ms + RMS_EPS).sqrt();
            inv_rms.push(inv);
            for ((o, &v), &gj) in out[r * d..(r + 1) * d].iter_mut().zip(row).zip(g) {
                *o = v * inv * gj;
            }
        }
        let value = Tensor::new(vec![n, d], out)?;
        Ok(self.push(value, Op::RmsNorm { x, gain, inv_rms }))
    }

    /// Gathers rows of a `[vocab, d]` table.
    pub fn embedding(&mut self, table: NodeId, ids: &[u32]) -> Result<NodeId> {
        let (v, d) = self.value(table).dims2()?;
        let t = self.value(table).data();
        let mut out = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            let id = id as usize;
            if id >= v {
                return Err(Error::shape("embedding", format!("token id {id} >= vocab {v}")));
            }
            out.extend_from_slice(&t[id * d..(id + 1) * d]);
        }
        let value = Tensor::new(vec![ids.len(), d], out)?;
        Ok(self.push(
            value,
            Op::Embedding {
                table,
                ids: ids.to_vec(),
            },
        ))
    }

    /// Rotary position embedding applied per head to a `[n, heads * head_dim]`
    /// input; row `r` is rotated for position `positions[r]`.
    pub fn rope(&mut self, x: NodeId, positions: &[usize], head_dim: usize, base: f64) -> Result<NodeId> {
        let (n, d) = self.value(x).dims2()?;
        if head_dim == 0 || !head_dim.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "rotary embedding needs an even head dim, got {head_dim}"
            )));
        }
        if d % head_dim != 0 || positions.len() != n {
            return Err(Error::shape(
                "rope",
                format!("[{n}, {d}] with head_dim {head_dim}, {} positions", positions.len()),
            ));
        }
        let mut out = self.value(x).data().to_vec();
        rotate_rows(&mut out, d, positions, head_dim, base, 1.0);
        let value = Tensor::new(vec![n, d], out)?;
        Ok(self.push(
            value,
            Op::Rope {
                x,
                positions: positions.to_vec(),
                head_dim,
                base,
            },
        ))
    }

    /// Multi-head causal self-attention over packed sequences. `q`, `k`, `v`
    /// are `[n, heads * head_dim]`; rows attend only to earlier rows of the
    /// same segment.
    pub fn causal_attention(
        &mut self,
        q: NodeId,
        k: NodeId,
        v: NodeId,
        segments: &[Segment],
        n_heads: usize,
    ) -> Result<NodeId> {
        self.same_shape("attention", q, k)?;
        self.same_shape("attention", q, v)?;
        let (n, d) = self.value(q).dims2()?;
        if n_heads == 0 || d % n_heads != 0 {
            return Err(Error::Config(format!("width {d} not divisible by {n_heads} heads")));
        }
        let covered: usize = segments.iter().map(|s| s.len).sum();
        if segments.iter().any(|s| s.start + s.len > n) || covered != n {
            return Err(Error::shape("attention", format!("segments do not tile {n} rows")));
        }
        let dh = d / n_heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let (qs, ks, vs) = (self.value(q).data(), self.value(k).data(), self.value(v).data());
        let mut out = vec![0.0; n * d];
        let mut probs = Vec::new();
        for seg in segments {
            for h in 0..n_heads {
                let col = h * dh;
                for i in 0..seg.len {
                    let ri = seg.start + i;
                    let qi = &qs[ri * d + col..ri * d + col + dh];
                    let base = probs.len();
                    for j in 0..=i {
                        let rj = seg.start + j;
                        let kj = &ks[rj * d + col..rj * d + col + dh];
                        probs.push(dot(qi, kj) * scale);
                    }
                    let lane = &mut probs[base..];
                    let max = lane.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let mut sum = 0.0;
                    for p in lane.iter_mut() {
                        *p = (*p - max).exp();
                        sum += *p;
                    }
                    for p in lane.iter_mut() {
                        *p /= sum;
                    }
                    let o = &mut out[ri * d + col..ri * d + col + dh];
                    for j in 0..=i {
                        let rj = seg.start + j;
                        axpy(o, probs[base + j], &vs[rj * d + col..rj * d + col + dh]);
                    }
                }
            }
        }
        let value = Tensor::new(vec![n, d], out)?;
        Ok(self.push(
            value,
            Op::Attention {
                q,
                k,
                v,
                segments: segments.to_vec(),
                n_heads,
                probs,
            },
        ))
    }

    pub fn select_rows(&mut self, x: NodeId, rows: &[usize]) -> Result<NodeId> {
        let (n, d) = self.value(x).dims2()?;
        let src = self.value(x).data();
        let mut out = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            if r >= n {
                return Err(Error::shape("select_rows", format!("row {r} of {n}")));
            }
            out.extend_from_slice(&src[r * d..(r + 1) * d]);
        }
        let value = Tensor::new(vec![rows.len(), d], out)?;
        Ok(self.push(value, Op::SelectRows { x, rows: rows.to_vec() }))
    }

    /// Per-row negative log-likelihood `-log softmax(logits[r])[targets[r]]`,
    /// returned as a `[n]` vector.
    pub fn token_nll(&mut self, logits: NodeId, targets: &[u32]) -> Result<NodeId> {
        let (n, v) = self.value(logits).dims2()?;
        if targets.len() != n {
            return Err(Error::shape(
                "token_nll",
                format!("{} targets for {n} rows", targets.len()),
            ));
        }
        let xs = self.value(logits).data();
        let mut probs = vec![0.0; n * v];
        let mut out = Vec::with_capacity(n);
        for r in 0..n {
            let t = targets[r] as usize;
            if t >= v {
                return Err(Error::shape("token_nll", format!("target {t} >= vocab {v}")));
            }
            let row = &xs[r * v..(r + 1) * v];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = row.iter().map(|&z| (z - max).exp()).sum();
            let lse = max + sum.ln();
            out.push(lse - row[t]);
            for (p, &z) in probs[r * v..(r + 1) * v].iter_mut().zip(row) {
                *p = (z - lse).exp();
            }
        }
        let value = Tensor::new(vec![n], out)?;
        Ok(self.push(
            value,
            Op::TokenNll {
                logits,
                targets: targets.to_vec(),
                probs,
            },
        ))
    }

    /// `Σ weights[i] · x[i]` with constant weights.
    pub fn weighted_sum(&mut self, x: NodeId, weights: &[f64]) -> Result<NodeId> {
        let xs = self.value(x).data();
        if weights.len() != xs.len() {
            return Err(Error::shape(
                "weighted_sum",
                format!("{} weights for {} values", weights.len(), xs.len()),
            ));
        }
        let s = xs.iter().zip(weights).map(|(a, w)| a * w).sum();
        Ok(self.push(
            Tensor::scalar(s),
            Op::WeightedSum {
                x,
                weights: weights.to_vec(),
            },
        ))
    }

    /// Masked token cross-entropy: mean NLL over tokens whose mask is non-zero.
    pub fn cross_entropy(&mut self, logits: NodeId, targets: &[u32], mask: &[f64]) -> Result<NodeId> {
        let total: f64 = mask.iter().sum();
        if total <= 0.0 {
            return Err(Error::NoSupervisedTokens);
        }
        let nll = self.token_nll(logits, targets)?;
        let weights: Vec<f64> = mask.iter().map(|m| m / total).collect();
        self.weighted_sum(nll, &weights)
    }

    /// Reverse pass from a scalar root. Consumes the graph: a second call
    /// returns [`Error::GraphConsumed`].
    pub fn backward(&mut self, root: NodeId) -> Result<Gradients> {
        if self.consumed {
            return Err(Error::GraphConsumed);
        }
        let rv = self.value(root);
        if !rv.is_scalar() {
            return Err(Error::NonScalarRoot(rv.shape().to_vec()));
        }
        self.consumed = true;

        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(vec![1.0]);
        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if let Op::Leaf = node.op {
                grads[idx] = Some(g);
                continue;
            }
            self.propagate(node, &g, &mut grads);
        }
        Ok(Gradients { grads })
    }

    fn buf<'a>(&self, grads: &'a mut [Option<Vec<f64>>], id: NodeId) -> &'a mut Vec<f64> {
        let len = self.nodes[id.0].value.numel();
        grads[id.0].get_or_insert_with(|| vec![0.0; len])
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        match &node.op {
            Op::Leaf => {}
            Op::MatMul { a, b } => {
                let (n, k) = self.value(*a).dims2().expect("2d");
                let (_, m) = self.value(*b).dims2().expect("2d");
                let bv = self.value(*b).data();
                gemm(n, m, k, g, false, bv, true, self.buf(grads, *a), 1.0);
                let av = self.value(*a).data();
                gemm(k, n, m, av, true, g, false, self.buf(grads, *b), 1.0);
            }
            Op::Add(a, b) => {
                add_into(self.buf(grads, *a), g, 1.0);
                add_into(self.buf(grads, *b), g, 1.0);
            }
            Op::Sub(a, b) => {
                add_into(self.buf(grads, *a), g, 1.0);
                add_into(self.buf(grads, *b), g, -1.0);
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                for ((o, &gi), &bi) in self.buf(grads, *a).iter_mut().zip(g).zip(bv) {
                    *o += gi * bi;
                }
                for ((o, &gi), &ai) in self.buf(grads, *b).iter_mut().zip(g).zip(av) {
                    *o += gi * ai;
                }
            }
            Op::Scale(x, f) => add_into(self.buf(grads, *x), g, *f),
            Op::Offset(x) => add_into(self.buf(grads, *x), g, 1.0),
            Op::Silu(x) => {
                let xv = self.value(*x).data();
                for ((o, &gi), &xi) in self.buf(grads, *x).iter_mut().zip(g).zip(xv) {
                    *o += gi * kernels::silu_grad(xi);
                }
            }
            Op::Softplus(x) => {
                let xv = self.value(*x).data();
                for ((o, &gi), &xi) in self.buf(grads, *x).iter_mut().zip(g).zip(xv) {
                    *o += gi * kernels::sigmoid(xi);
                }
            }
            Op::Sum(x) => {
                for o in self.buf(grads, *x).iter_mut() {
                    *o += g[0];
                }
            }
            Op::Softmax { x, axis } => {
                let y = node.value.data();
                let lanes = Lanes::new(node.value.shape(), *axis);
                let dx = self.buf(grads, *x);
                lanes.for_each(|idx| {
                    let idx: Vec<usize> = idx.collect();
                    let dot: f64 = idx.iter().map(|&i| g[i] * y[i]).sum();
                    for &i in &idx {
                        dx[i] += y[i] * (g[i] - dot);
                    }
                });
            }
            Op::RmsNorm { x, gain, inv_rms } => {
                let xv = self.value(*x).data();
                let gv = self.value(*gain).data();
                let d = gv.len();
                let mut dgain = vec![0.0; d];
                {
                    let dx = self.buf(grads, *x);
                    let mut gy = vec![0.0; d];
                    for (r, &inv) in inv_rms.iter().enumerate() {
                        let row = &xv[r * d..(r + 1) * d];
                        let grow = &g[r * d..(r + 1) * d];
                        for j in 0..d {
                            gy[j] = grow[j] * gv[j];
                            dgain[j] += grow[j] * row[j] * inv;
                        }
                        let proj = dot(&gy, row) * inv * inv * inv / d as f64;
                        for j in 0..d {
                            dx[r * d + j] += gy[j] * inv - row[j] * proj;
                        }
                    }
                }
                add_into(self.buf(grads, *gain), &dgain, 1.0);
            }
            Op::Embedding { table, ids } => {
                let (_, d) = self.value(*table).dims2().expect("2d");
                let dt = self.buf(grads, *table);
                for (r, &id) in ids.iter().enumerate() {
                    let id = id as usize;
                    add_into(&mut dt[id * d..(id + 1) * d], &g[r * d..(r + 1) * d], 1.0);
                }
            }
            Op::Rope {
                x,
                positions,
                head_dim,
                base,
            } => {
                let (_, d) = node.value.dims2().expect("2d");
                let mut back = g.to_vec();
                rotate_rows(&mut back, d, positions, *head_dim, *base, -1.0);
                add_into(self.buf(grads, *x), &back, 1.0);
            }
            Op::Attention {
                q,
                k,
                v,
                segments,
                n_heads,
                probs,
            } => {
                let (n, d) = node.value.dims2().expect("2d");
                let dh = d / n_heads;
                let scale = 1.0 / (dh as f64).sqrt();
                let (qs, ks, vs) = (self.value(*q).data(), self.value(*k).data(), self.value(*v).data());
                let mut dq = vec![0.0; n * d];
                let mut dk = vec![0.0; n * d];
                let mut dv = vec![0.0; n * d];
                let mut dp = Vec::new();
                let mut offset = 0;
                for seg in segments {
                    for h in 0..*n_heads {
                        let col = h * dh;
                        for i in 0..seg.len {
                            let ri = seg.start + i;
                            let p = &probs[offset..offset + i + 1];
                            offset += i + 1;
                            let go = &g[ri * d + col..ri * d + col + dh];
                            dp.clear();
                            for (j, &pj) in p.iter().enumerate() {
                                let rj = seg.start + j;
                                dp.push(dot(go, &vs[rj * d + col..rj * d + col + dh]));
                                axpy(&mut dv[rj * d + col..rj * d + col + dh], pj, go);
                            }
                            let mix: f64 = p.iter().zip(&dp).map(|(a, b)| a * b).sum();
                            let qi = &qs[ri * d + col..ri * d + col + dh];
                            for (j, &pj) in p.iter().enumerate() {
                                let rj = seg.start + j;
                                let ds = pj * (dp[j] - mix) * scale;
                                axpy(
                                    &mut dq[ri * d + col..ri * d + col + dh],
                                    ds,
                                    &ks[rj * d + col..rj * d + col + dh],
                                );
                                axpy(&mut dk[rj * d + col..rj * d + col + dh], ds, qi);
                            }
                        }
                    }
                }
                add_into(self.buf(grads, *q), &dq, 1.0);
                add_into(self.buf(grads, *k), &dk, 1.0);
                add_into(self.buf(grads, *v), &dv, 1.0);
            }
            Op::SelectRows { x, rows } => {
                let (_, d) = self.value(*x).dims2().expect("2d");
                let dx = self.buf(grads, *x);
                for (i, &r) in rows.iter().enumerate() {
                    add_into(&mut dx[r * d..(r + 1) * d], &g[i * d..(i + 1) * d], 1.0);
                }
            }
            Op::TokenNll { logits, targets, probs } => {
                let (_, v) = self.value(*logits).dims2().expect("2d");
                let dl = self.buf(grads, *logits);
                for (r, (&t, &gr)) in targets.iter().zip(g).enumerate() {
                    if gr == 0.0 {
                        continue;
                    }
                    let row = &mut dl[r * v..(r + 1) * v];
                    for (o, &p) in row.iter_mut().zip(&probs[r * v..(r + 1) * v]) {
                        *o += gr * p;
                    }
                    row[t as usize] -= gr;
                }
            }
            Op::WeightedSum { x, weights } => add_into(self.buf(grads, *x), weights, g[0]),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn add_into(dst: &mut [f64], src: &[f64], factor: f64) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += factor * s;
    }
}

/// Rotates each consecutive pair within every head by `sign · pos · θ_i`.
pub(crate) fn rotate_rows(data: &mut [f64], width: usize, positions: &[usize], head_dim: usize, base: f64, sign: f64) {
    let half = head_dim / 2;
    let freqs: Vec<f64> = (0..half)
        .map(|i| base.powf(-2.0 * i as f64 / head_dim as f64))
        .collect();
    for (r, &pos) in positions.iter().enumerate() {
        let row = &mut data[r * width..(r + 1) * width];
        for (i, &f) in freqs.iter().enumerate() {
            let (sin, cos) = (sign * pos as f64 * f).sin_cos();
            for head in row.chunks_exact_mut(head_dim) {
                let (a, b) = (head[2 * i], head[2 * i + 1]);
                head[2 * i] = a * cos - b * sin;
                head[2 * i + 1] = a * sin + b * cos;
            }
        }
    }
}
