use super::config::ModelConfig;
use super::params::{Bound, ModelParams, Parameterized, RewardModelParams, TrunkIds};
use crate::error::{Error, Result};
use crate::numerics::{rotate_rows, Graph, NodeId, Segment, Tensor};

/// Several token sequences packed row-wise into one batch. Positions restart
/// at zero for every sequence and attention never crosses a segment.
#[derive(Clone, Debug, Default)]
pub struct PackedBatch {
    pub ids: Vec<u32>,
    pub positions: Vec<usize>,
    pub segments: Vec<Segment>,
}

impl PackedBatch {
    pub fn pack<S: AsRef<[u32]>>(seqs: &[S], max_len: usize) -> Result<Self> {
        let mut b = PackedBatch::default();
        for s in seqs {
            let s = s.as_ref();
            if s.is_empty() {
                return Err(Error::EmptySequence);
            }
            if s.len() > max_len {
                return Err(Error::SequenceTooLong {
                    len: s.len(),
                    max: max_len,
                });
            }
            b.segments.push(Segment {
                start: b.ids.len(),
                len: s.len(),
            });
            b.ids.extend_from_slice(s);
            b.positions.extend(0..s.len());
        }
        Ok(b)
    }

    pub fn rows(&self) -> usize {
        self.ids.len()
    }

    /// Row index of the final token of each sequence.
    pub fn last_rows(&self) -> Vec<usize> {
        self.segments.iter().map(|s| s.start + s.len - 1).collect()
    }
}

/// `(silu(x·W) ⊙ (x·V))·W_out` recorded on the graph.
pub fn swiglu_node(g: &mut Graph, x: NodeId, w: NodeId, v: NodeId, w_out: NodeId) -> Result<NodeId> {
    let gate = g.matmul(x, w)?;
    let gate = g.silu(gate);
    let up = g.matmul(x, v)?;
    let h = g.mul(gate, up)?;
    g.matmul(h, w_out)
}

/// Final-normed hidden states `[rows, d_model]` for a packed batch.
pub fn trunk_forward(g: &mut Graph, cfg: &ModelConfig, t: &TrunkIds, batch: &PackedBatch) -> Result<NodeId> {
    let dh = cfg.head_dim();
    let mut x = g.embedding(t.tok_embed, &batch.ids)?;
    for b in &t.blocks {
        let h = g.rms_norm(x, b.attn_norm)?;
        let q = g.matmul(h, b.wq)?;
        let k = g.matmul(h, b.wk)?;
        let v = g.matmul(h, b.wv)?;
        let q = g.rope(q, &batch.positions, dh, cfg.rope_base)?;
        let k = g.rope(k, &batch.positions, dh, cfg.rope_base)?;
        let a = g.causal_attention(q, k, v, &batch.segments, cfg.n_heads)?;
        let o = g.matmul(a, b.wo)?;
        x = g.add(x, o)?;
        let h = g.rms_norm(x, b.ffn_norm)?;
        let f = swiglu_node(g, h, b.w_gate, b.w_up, b.w_down)?;
        x = g.add(x, f)?;
    }
    g.rms_norm(x, t.final_norm)
}

/// Language-model logits. With `rows = Some(..)` only those rows are
/// projected through the unembedding.
pub fn lm_logits(
    g: &mut Graph,
    cfg: &ModelConfig,
    bound: &Bound,
    batch: &PackedBatch,
    rows: Option<&[usize]>,
) -> Result<NodeId> {
    let hidden = trunk_forward(g, cfg, &bound.trunk, batch)?;
    let hidden = match rows {
        Some(r) => g.select_rows(hidden, r)?,
        None => hidden,
    };
    g.matmul(hidden, bound.out)
}

/// Rewards `[n_seqs, 1]` read from the hidden state of each sequence's last
/// token.
pub fn rm_rewards(g: &mut Graph, cfg: &ModelConfig, bound: &Bound, batch: &PackedBatch) -> Result<NodeId> {
    let hidden = trunk_forward(g, cfg, &bound.trunk, batch)?;
    let last = g.select_rows(hidden, &batch.last_rows())?;
    g.matmul(last, bound.out)
}

/// Logits `[seq, vocab]` for a single sequence.
pub fn lm_forward(params: &ModelParams, tokens: &[u32]) -> Result<Tensor> {
    let cfg = params.config();
    let batch = PackedBatch::pack(&[tokens], cfg.max_seq_len)?;
    let mut g = Graph::new();
    let bound = params.bind(&mut g);
    let logits = lm_logits(&mut g, cfg, &bound, &batch, None)?;
    Ok(g.value(logits).clone())
}

/// Logits of the final position only.
pub fn next_token_logits(params: &ModelParams, tokens: &[u32]) -> Result<Vec<f64>> {
    let cfg = params.config();
    let batch = PackedBatch::pack(&[tokens], cfg.max_seq_len)?;
    let mut g = Graph::new();
    let bound = params.bind(&mut g);
    let logits = lm_logits(&mut g, cfg, &bound, &batch, Some(&batch.last_rows()))?;
    Ok(g.value(logits).data().to_vec())
}

/// Scalar reward for one sequence.
pub fn rm_forward(params: &RewardModelParams, tokens: &[u32]) -> Result<f64> {
    Ok(rm_forward_batch(params, &[tokens])?[0])
}

pub fn rm_forward_batch<S: AsRef<[u32]>>(params: &RewardModelParams, seqs: &[S]) -> Result<Vec<f64>> {
    let cfg = params.config();
    let batch = PackedBatch::pack(seqs, cfg.max_seq_len)?;
    let mut g = Graph::new();
    let bound = params.bind(&mut g);
    let r = rm_rewards(&mut g, cfg, &bound, &batch)?;
    Ok(g.value(r).data().to_vec())
}

/// Rotates query and key rows (`[seq, n_heads * head_dim]`) for the given
/// positions. Pair `(2i, 2i+1)` of each head turns by
/// `position · base^(-2i / head_dim)`.
pub fn rope_apply(q: &Tensor, k: &Tensor, positions: &[usize], head_dim: usize, base: f64) -> Result<(Tensor, Tensor)> {
    if head_dim == 0 || !head_dim.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "rotary embedding needs an even head dim, got {head_dim}"
        )));
    }
    let rotate = |t: &Tensor| -> Result<Tensor> {
        let (n, d) = t.dims2()?;
        if d % head_dim != 0 || positions.len() != n {
            return Err(Error::shape(
                "rope_apply",
                format!("[{n}, {d}] with head_dim {head_dim}"),
            ));
        }
        let mut data = t.data().to_vec();
        rotate_rows(&mut data, d, positions, head_dim, base, 1.0);
        Tensor::new(vec![n, d], data)
    };
    Ok((rotate(q)?, rotate(k)?))
}

/// SwiGLU feed-forward on plain tensors.
pub fn swiglu(x: &Tensor, w: &Tensor, v: &Tensor, w_out: &Tensor) -> Result<Tensor> {
    let mut g = Graph::new();
    let ids = [x, w, v, w_out].map(|t| g.leaf(t.clone()));
    let out = swiglu_node(&mut g, ids[0], ids[1], ids[2], ids[3])?;
    Ok(g.value(out).clone())
}
