//! Training losses recorded on a [`Graph`].
//!
//! Every supervised loss here is a weighted sum of per-token negative
//! log-likelihoods. A sequence contributes the mean NLL over its supervised
//! tokens, scaled by a per-sequence weight:
//!
//! | loss | sequence weight |
//! |------|-----------------|
//! | SFT  | `1 / B` |
//! | FA   | `1 / K` for the `K` samples with reward `> t`, else dropped |
//! | RWR  | `exp(clamp(r, -10, 10) / β) / B` |
//! | CA   | `1 / B`, on score-conditioned sequences |
//!
//! Because all of them go through [`weighted_nll`], FA with `t = -∞` and RWR
//! with zero rewards produce bit-identical values to SFT.

use crate::data::{format_ca, format_chat, LabeledSample, PreferencePair, TokenSeq};
use crate::error::{Error, Result};
use crate::model::{lm_logits, rm_rewards, Bound, ModelConfig, ModelParams, PackedBatch, Parameterized};
use crate::numerics::{softplus, Graph, NodeId};

/// Rewards are clamped to `[-RWR_CLAMP, RWR_CLAMP]` before exponentiation.
pub const RWR_CLAMP: f64 = 10.0;

/// Next-token prediction rows of a set of sequences, packed for one forward
/// pass. Only supervised positions are kept.
#[derive(Clone, Debug)]
pub struct Supervision {
    pub batch: PackedBatch,
    /// Packed-batch row whose output predicts each supervised token.
    pub rows: Vec<usize>,
    pub targets: Vec<u32>,
    /// Index of the source sequence for each row.
    pub owner: Vec<usize>,
    /// Supervised token count per sequence.
    pub counts: Vec<usize>,
}

impl Supervision {
    pub fn new(seqs: &[TokenSeq], max_len: usize) -> Result<Self> {
        if seqs.is_empty() {
            return Err(Error::EmptyInput("batch"));
        }
        let mut inputs = Vec::with_capacity(seqs.len());
        let (mut rows, mut targets, mut owner, mut counts) = (vec![], vec![], vec![], vec![]);
        let mut start = 0;
        for (s, seq) in seqs.iter().enumerate() {
            if seq.ids.len() != seq.loss_mask.len() {
                return Err(Error::shape("supervision", "ids and loss_mask lengths differ"));
            }
            let n = seq.ids.len();
            let mut count = 0;
            for i in 1..n {
                if seq.loss_mask[i] != 0 {
                    rows.push(start + i - 1);
                    targets.push(seq.ids[i]);
                    owner.push(s);
                    count += 1;
                }
            }
            if count == 0 {
                return Err(Error::NoSupervisedTokens);
            }
            counts.push(count);
            inputs.push(&seq.ids[..n - 1]);
            start += n - 1;
        }
        let batch = PackedBatch::pack(&inputs, max_len)?;
        Ok(Self {
            batch,
            rows,
            targets,
            owner,
            counts,
        })
    }

    /// Per-row weights `seq_weight[owner] / count[owner]`.
    pub fn row_weights(&self, seq_weights: &[f64]) -> Vec<f64> {
        self.owner
            .iter()
            .map(|&s| seq_weights[s] / self.counts[s] as f64)
            .collect()
    }

    /// `[rows]` vector of per-token NLLs.
    pub fn token_nll(&self, g: &mut Graph, cfg: &ModelConfig, bound: &Bound) -> Result<NodeId> {
        let logits = lm_logits(g, cfg, bound, &self.batch, Some(&self.rows))?;
        g.token_nll(logits, &self.targets)
    }
}

/// `Σ_s w_s · mean-NLL_s` over the supervised tokens of each sequence.
pub fn weighted_nll(
    g: &mut Graph,
    cfg: &ModelConfig,
    bound: &Bound,
    seqs: &[TokenSeq],
    seq_weights: &[f64],
) -> Result<NodeId> {
    if seq_weights.len() != seqs.len() {
        return Err(Error::shape(
            "weighted_nll",
            format!("{} weights for {} sequences", seq_weights.len(), seqs.len()),
        ));
    }
    let sup = Supervision::new(seqs, cfg.max_seq_len)?;
    let nll = sup.token_nll(g, cfg, bound)?;
    g.weighted_sum(nll, &sup.row_weights(seq_weights))
}

/// Masked next-token cross-entropy, mean per sequence then mean over the batch.
pub fn sft_loss(g: &mut Graph, cfg: &ModelConfig, bound: &Bound, seqs: &[TokenSeq]) -> Result<NodeId> {
    let w = vec![1.0 / seqs.len().max(1) as f64; seqs.len()];
    weighted_nll(g, cfg, bound, seqs, &w)
}

/// Samples kept by the filter: `norm_reward > t`.
pub fn fa_filter(batch: &[LabeledSample], t: f64) -> Vec<&LabeledSample> {
    batch.iter().filter(|s| s.norm_reward > t).collect()
}

/// Sequences and weights for FA: the samples with reward above `t`, each
/// weighted `1 / K`. Fails with [`Error::EmptyFilteredBatch`] when nothing
/// passes.
pub fn fa_inputs(batch: &[LabeledSample], t: f64) -> Result<(Vec<TokenSeq>, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("batch"));
    }
    let kept: Vec<TokenSeq> = fa_filter(batch, t)
        .into_iter()
        .map(|s| format_chat(&s.sample()))
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyFilteredBatch);
    }
    let w = vec![1.0 / kept.len() as f64; kept.len()];
    Ok((kept, w))
}

/// SFT loss restricted to samples whose normalized reward exceeds `t`,
/// averaged over those samples.
pub fn fa_loss(g: &mut Graph, cfg: &ModelConfig, bound: &Bound, batch: &[LabeledSample], t: f64) -> Result<NodeId> {
    let (seqs, w) = fa_inputs(batch, t)?;
    weighted_nll(g, cfg, bound, &seqs, &w)
}

/// `exp(clamp(r) / β)`.
pub fn rwr_weight(norm_reward: f64, beta: f64) -> f64 {
    (norm_reward.clamp(-RWR_CLAMP, RWR_CLAMP) / beta).exp()
}

/// Sequences and weights for RWR: every sample, weighted
/// `rwr_weight(r, β) / B`.
pub fn rwr_inputs(batch: &[LabeledSample], beta: f64) -> Result<(Vec<TokenSeq>, Vec<f64>)> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Config(format!("beta_rwr must be positive, got {beta}")));
    }
    if batch.is_empty() {
        return Err(Error::EmptyInput("batch"));
    }
    let seqs = batch.iter().map(|s| format_chat(&s.sample())).collect();
    let b = batch.len() as f64;
    let w = batch.iter().map(|s| rwr_weight(s.norm_reward, beta) / b).collect();
    Ok((seqs, w))
}

/// Reward-weighted SFT loss: each sequence's mean NLL times
/// [`rwr_weight`], averaged over the batch.
pub fn rwr_loss(g: &mut Graph, cfg: &ModelConfig, bound: &Bound, batch: &[LabeledSample], beta: f64) -> Result<NodeId> {
    let (seqs, w) = rwr_inputs(batch, beta)?;
    weighted_nll(g, cfg, bound, &seqs, &w)
}

/// Each sample rendered with its own normalized reward as the score span.
pub fn ca_sequences(batch: &[LabeledSample]) -> Result<Vec<TokenSeq>> {
    batch.iter().map(|s| format_ca(&s.sample(), s.norm_reward)).collect()
}

/// Sequences and weights for CA: score-conditioned sequences, weighted `1 / B`.
pub fn ca_inputs(batch: &[LabeledSample]) -> Result<(Vec<TokenSeq>, Vec<f64>)> {
    let seqs = ca_sequences(batch)?;
    let w = vec![1.0 / seqs.len().max(1) as f64; seqs.len()];
    Ok((seqs, w))
}

/// SFT loss on score-conditioned sequences.
pub fn ca_loss(g: &mut Graph, cfg: &ModelConfig, bound: &Bound, batch: &[LabeledSample]) -> Result<NodeId> {
    let (seqs, w) = ca_inputs(batch)?;
    weighted_nll(g, cfg, bound, &seqs, &w)
}

/// `-log σ(r_w - r_l)`, evaluated as `softplus(-(r_w - r_l))`.
pub fn rm_ranking_loss(r_w: f64, r_l: f64) -> f64 {
    softplus(-(r_w - r_l))
}

/// Mean ranking loss over a batch of pairs; chosen and rejected responses
/// share one packed forward pass.
pub fn rm_pair_loss(g: &mut Graph, cfg: &ModelConfig, bound: &Bound, pairs: &[PreferencePair]) -> Result<NodeId> {
    let (r_w, r_l) = rm_pair_rewards(g, cfg, bound, pairs)?;
    let d = g.sub(r_l, r_w)?;
    let l = g.softplus(d);
    Ok(g.mean(l))
}

/// Reward nodes `([B, 1] chosen, [B, 1] rejected)`.
pub fn rm_pair_rewards(
    g: &mut Graph,
    cfg: &ModelConfig,
    bound: &Bound,
    pairs: &[PreferencePair],
) -> Result<(NodeId, NodeId)> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("pairs"));
    }
    let b = pairs.len();
    let seqs: Vec<Vec<u32>> = pairs
        .iter()
        .map(|p| format_chat(&p.chosen_sample()).ids)
        .chain(pairs.iter().map(|p| format_chat(&p.rejected_sample()).ids))
        .collect();
    let batch = PackedBatch::pack(&seqs, cfg.max_seq_len)?;
    let r = rm_rewards(g, cfg, bound, &batch)?;
    let chosen: Vec<usize> = (0..b).collect();
    let rejected: Vec<usize> = (b..2 * b).collect();
    Ok((g.select_rows(r, &chosen)?, g.select_rows(r, &rejected)?))
}

/// KL-regularized objective with no pretraining term.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PPOObjectiveConfig {
    pub beta_kl: f64,
    /// Weight of the pretraining term; always 0 here.
    pub gamma: f64,
}

impl Default for PPOObjectiveConfig {
    fn default() -> Self {
        Self {
            beta_kl: 0.05,
            gamma: 0.0,
        }
    }
}

impl PPOObjectiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta_kl >= 0.0 && self.beta_kl.is_finite()) {
            return Err(Error::Config(format!(
                "beta_kl must be finite and >= 0, got {}",
                self.beta_kl
            )));
        }
        if self.gamma != 0.0 {
            return Err(Error::Config(
                "gamma must be 0; the pretraining term is not supported".into(),
            ));
        }
        Ok(())
    }
}

/// Per-token NLL of the supervised tokens under a fixed model.
pub fn token_nll_values(params: &ModelParams, sup: &Supervision) -> Result<Vec<f64>> {
    let mut g = Graph::new();
    let bound = params.bind(&mut g);
    let nll = sup.token_nll(&mut g, params.config(), &bound)?;
    Ok(g.value(nll).data().to_vec())
}

/// `log π(response + EOS | prompt)` for each sequence.
pub fn response_logprobs(params: &ModelParams, seqs: &[TokenSeq]) -> Result<Vec<f64>> {
    let sup = Supervision::new(seqs, params.config().max_seq_len)?;
    let nll = token_nll_values(params, &sup)?;
    let mut out = vec![0.0; seqs.len()];
    for (v, &s) in nll.iter().zip(&sup.owner) {
        out[s] -= v;
    }
    Ok(out)
}

/// `mean_b [ r_b - β_kl · (log π(x_b|p_b) - log π_ref(x_b|p_b)) ]`, with the
/// policy bound into `g` and the reference evaluated separately.
///
/// The log-ratio is accumulated token by token as `nll_ref - nll_policy`, so
/// a policy identical to the reference contributes exactly zero.
pub fn alignment_objective(
    g: &mut Graph,
    policy_cfg: &ModelConfig,
    policy: &Bound,
    reference: &ModelParams,
    batch: &[LabeledSample],
    obj: &PPOObjectiveConfig,
) -> Result<NodeId> {
    obj.validate()?;
    if policy_cfg.vocab_size != reference.config().vocab_size {
        return Err(Error::VocabMismatch {
            policy: policy_cfg.vocab_size,
            reference: reference.config().vocab_size,
        });
    }
    if batch.is_empty() {
        return Err(Error::EmptyInput("batch"));
    }
    let seqs: Vec<TokenSeq> = batch.iter().map(|s| format_chat(&s.sample())).collect();
    let sup = Supervision::new(&seqs, policy_cfg.max_seq_len)?;
    let ref_nll = token_nll_values(reference, &sup)?;

    let nll = sup.token_nll(g, policy_cfg, policy)?;
    let ref_nll = g.leaf(crate::numerics::Tensor::new(vec![ref_nll.len()], ref_nll)?);
    let diff = g.sub(nll, ref_nll)?;
    let b = batch.len() as f64;
    let kl = g.weighted_sum(diff, &vec![obj.beta_kl / b; sup.rows.len()])?;
    let mean_reward = batch.iter().map(|s| s.norm_reward).sum::<f64>() / b;
    Ok(g.offset(kl, mean_reward))
}

/// Value of a loss built on a fresh graph.
pub fn evaluate<P, F>(params: &P, build: F) -> Result<f64>
where
    P: Parameterized,
    F: FnOnce(&mut Graph, &ModelConfig, &Bound) -> Result<NodeId>,
{
    let mut g = Graph::new();
    let bound = params.bind(&mut g);
    let root = build(&mut g, params.config(), &bound)?;
    Ok(g.scalar(root))
}

/// Loss value and gradients; gradients land in each tensor's grad buffer.
pub fn value_and_grad<P, F>(params: &mut P, build: F) -> Result<f64>
where
    P: Parameterized,
    F: FnOnce(&mut Graph, &ModelConfig, &Bound) -> Result<NodeId>,
{
    let mut g = Graph::new();
    let bound = params.bind(&mut g);
    let cfg = params.config().clone();
    let root = build(&mut g, &cfg, &bound)?;
    let value = g.scalar(root);
    let mut grads = g.backward(root)?;
    params.store_grads(&bound, &mut grads)?;
    Ok(value)
}
