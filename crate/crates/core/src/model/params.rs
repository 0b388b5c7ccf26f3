use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::ModelConfig;
use crate::error::Result;
use crate::numerics::{Gradients, Graph, NodeId, Tensor};

const INIT_STD: f64 = 0.02;

/// Weights of one pre-norm transformer block. No bias vectors anywhere.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub attn_norm: Tensor,
    pub wq: Tensor,
    pub wk: Tensor,
    pub wv: Tensor,
    pub wo: Tensor,
    pub ffn_norm: Tensor,
    pub w_gate: Tensor,
    pub w_up: Tensor,
    pub w_down: Tensor,
}

const BLOCK_FIELDS: [&str; 9] = [
    "attn_norm",
    "wq",
    "wk",
    "wv",
    "wo",
    "ffn_norm",
    "w_gate",
    "w_up",
    "w_down",
];

impl Block {
    fn fields(&self) -> [&Tensor; 9] {
        [
            &self.attn_norm,
            &self.wq,
            &self.wk,
            &self.wv,
            &self.wo,
            &self.ffn_norm,
            &self.w_gate,
            &self.w_up,
            &self.w_down,
        ]
    }

    fn fields_mut(&mut self) -> [&mut Tensor; 9] {
        [
            &mut self.attn_norm,
            &mut self.wq,
            &mut self.wk,
            &mut self.wv,
            &mut self.wo,
            &mut self.ffn_norm,
            &mut self.w_gate,
            &mut self.w_up,
            &mut self.w_down,
        ]
    }
}

/// Embedding, transformer blocks and final norm, shared by the language
/// model and the reward model.
#[derive(Clone, Debug, PartialEq)]
pub struct Trunk {
    pub config: ModelConfig,
    pub tok_embed: Tensor,
    pub blocks: Vec<Block>,
    pub final_norm: Tensor,
}

impl Trunk {
    fn init(config: &ModelConfig, rng: &mut ChaCha8Rng) -> Self {
        let (d, f) = (config.d_model, config.d_ff);
        let base = Normal::new(0.0, INIT_STD).expect("valid std");
        let resid = Normal::new(0.0, INIT_STD / (2.0 * config.n_layers as f64).sqrt()).expect("valid std");
        let mut normal = |shape: &[usize], dist: &Normal<f64>| {
            let n = shape.iter().product();
            let data = (0..n).map(|_| dist.sample(rng)).collect();
            Tensor::new(shape.to_vec(), data).expect("shape")
        };
        let tok_embed = normal(&[config.vocab_size, d], &base);
        let blocks = (0..config.n_layers)
            .map(|_| Block {
                attn_norm: Tensor::filled(&[d], 1.0),
                wq: normal(&[d, d], &base),
                wk: normal(&[d, d], &base),
                wv: normal(&[d, d], &base),
                wo: normal(&[d, d], &resid),
                ffn_norm: Tensor::filled(&[d], 1.0),
                w_gate: normal(&[d, f], &base),
                w_up: normal(&[d, f], &base),
                w_down: normal(&[f, d], &resid),
            })
            .collect();
        Self {
            config: config.clone(),
            tok_embed,
            blocks,
            final_norm: Tensor::filled(&[d], 1.0),
        }
    }

    fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out = vec![("tok_embed".to_owned(), &self.tok_embed)];
        for (i, b) in self.blocks.iter().enumerate() {
            for (name, t) in BLOCK_FIELDS.iter().zip(b.fields()) {
                out.push((format!("blocks.{i}.{name}"), t));
            }
        }
        out.push(("final_norm".to_owned(), &self.final_norm));
        out
    }

    fn named_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = vec![("tok_embed".to_owned(), &mut self.tok_embed)];
        for (i, b) in self.blocks.iter_mut().enumerate() {
            for (name, t) in BLOCK_FIELDS.iter().zip(b.fields_mut()) {
                out.push((format!("blocks.{i}.{name}"), t));
            }
        }
        out.push(("final_norm".to_owned(), &mut self.final_norm));
        out
    }

    fn bind(&self, g: &mut Graph) -> TrunkIds {
        let tok_embed = g.leaf(self.tok_embed.clone());
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let [attn_norm, wq, wk, wv, wo, ffn_norm, w_gate, w_up, w_down] = b.fields().map(|t| g.leaf(t.clone()));
                BlockIds {
                    attn_norm,
                    wq,
                    wk,
                    wv,
                    wo,
                    ffn_norm,
                    w_gate,
                    w_up,
                    w_down,
                }
            })
            .collect();
        let final_norm = g.leaf(self.final_norm.clone());
        TrunkIds {
            tok_embed,
            blocks,
            final_norm,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BlockIds {
    pub attn_norm: NodeId,
    pub wq: NodeId,
    pub wk: NodeId,
    pub wv: NodeId,
    pub wo: NodeId,
    pub ffn_norm: NodeId,
    pub w_gate: NodeId,
    pub w_up: NodeId,
    pub w_down: NodeId,
}

impl BlockIds {
    fn all(&self) -> [NodeId; 9] {
        [
            self.attn_norm,
            self.wq,
            self.wk,
            self.wv,
            self.wo,
            self.ffn_norm,
            self.w_gate,
            self.w_up,
            self.w_down,
        ]
    }
}

/// Graph nodes holding a bound copy of a [`Trunk`].
#[derive(Clone, Debug)]
pub struct TrunkIds {
    pub tok_embed: NodeId,
    pub blocks: Vec<BlockIds>,
    pub final_norm: NodeId,
}

impl TrunkIds {
    fn all(&self) -> Vec<NodeId> {
        let mut out = vec![self.tok_embed];
        for b in &self.blocks {
            out.extend(b.all());
        }
        out.push(self.final_norm);
        out
    }
}

/// Graph nodes for a bound model: the trunk plus its output projection
/// (unembedding for the language model, scalar head for the reward model).
#[derive(Clone, Debug)]
pub struct Bound {
    pub trunk: TrunkIds,
    pub out: NodeId,
}

impl Bound {
    /// Node ids in the same order as [`Parameterized::named_tensors`].
    pub fn ids(&self) -> Vec<NodeId> {
        let mut ids = self.trunk.all();
        ids.push(self.out);
        ids
    }
}

/// A model whose tensors can be enumerated by name, bound into a [`Graph`]
/// and updated from a backward pass.
pub trait Parameterized {
    fn config(&self) -> &ModelConfig;
    fn named_tensors(&self) -> Vec<(String, &Tensor)>;
    fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor)>;
    fn bind(&self, g: &mut Graph) -> Bound;

    fn num_params(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.numel()).sum()
    }

    /// Copies gradients for every bound tensor into its grad buffer.
    /// Fails with [`crate::Error::GradNotZeroed`] if a buffer is still set.
    fn store_grads(&mut self, bound: &Bound, grads: &mut Gradients) -> Result<()> {
        for ((name, t), id) in self.named_tensors_mut().into_iter().zip(bound.ids()) {
            let g = grads.take_or_zeros(id, t.numel());
            t.set_grad(&name, g)?;
        }
        Ok(())
    }

    fn zero_grads(&mut self) {
        for (_, t) in self.named_tensors_mut() {
            t.zero_grad();
        }
    }
}

/// Decoder-only language model with an untied output unembedding.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub trunk: Trunk,
    /// `[d_model, vocab]`, stored separately from the token embedding.
    pub unembed: Tensor,
}

impl ModelParams {
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trunk = Trunk::init(config, &mut rng);
        let dist = Normal::new(0.0, INIT_STD).expect("valid std");
        let n = config.d_model * config.vocab_size;
        let data = (0..n).map(|_| dist.sample(&mut rng)).collect();
        let unembed = Tensor::new(vec![config.d_model, config.vocab_size], data)?;
        Ok(Self { trunk, unembed })
    }

    pub(crate) fn trunk_named(&self) -> impl Iterator<Item = (String, &Tensor)> {
        self.trunk.named().into_iter()
    }
}

impl Parameterized for ModelParams {
    fn config(&self) -> &ModelConfig {
        &self.trunk.config
    }

    fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut v = self.trunk.named();
        v.push(("unembed".into(), &self.unembed));
        v
    }

    fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut v = self.trunk.named_mut();
        v.push(("unembed".into(), &mut self.unembed));
        v
    }

    fn bind(&self, g: &mut Graph) -> Bound {
        let trunk = self.trunk.bind(g);
        let out = g.leaf(self.unembed.clone());
        Bound { trunk, out }
    }
}

/// Reward model: the language-model trunk with a `[d_model, 1]` scalar head
/// in place of the unembedding.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardModelParams {
    pub trunk: Trunk,
    pub head: Tensor,
}

impl RewardModelParams {
    /// Reuses the trunk of a trained language model; the head starts at zero
    /// so every initial reward is exactly 0.
    pub fn from_lm(lm: &ModelParams) -> Self {
        let mut trunk = lm.trunk.clone();
        for (_, t) in trunk.named_mut() {
            t.zero_grad();
        }
        Self {
            head: Tensor::zeros(&[trunk.config.d_model, 1]),
            trunk,
        }
    }

    /// Randomly initialized trunk and head; used as an untrained baseline.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trunk = Trunk::init(config, &mut rng);
        let dist = Normal::new(0.0, INIT_STD).expect("valid std");
        let data = (0..config.d_model).map(|_| dist.sample(&mut rng)).collect();
        let head = Tensor::new(vec![config.d_model, 1], data)?;
        Ok(Self { trunk, head })
    }
}

impl Parameterized for RewardModelParams {
    fn config(&self) -> &ModelConfig {
        &self.trunk.config
    }

    fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut v = self.trunk.named();
        v.push(("head".into(), &self.head));
        v
    }

    fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut v = self.trunk.named_mut();
        v.push(("head".into(), &mut self.head));
        v
    }

    fn bind(&self, g: &mut Graph) -> Bound {
        let trunk = self.trunk.bind(g);
        let out = g.leaf(self.head.clone());
        Bound { trunk, out }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_bias_tensors_and_untied_output() {
        let mut p = ModelParams::init(&ModelConfig::tiny(), 0).unwrap();
        assert!(p.named_tensors().iter().all(|(n, _)| !n.contains("bias")));
        let before = p.unembed.clone();
        p.trunk.tok_embed.data_mut()[0] += 1.0;
        assert_eq!(p.unembed, before);
        let embed = p.trunk.tok_embed.clone();
        p.unembed.data_mut()[0] += 1.0;
        assert_eq!(p.trunk.tok_embed, embed);
    }

    #[test]
    fn head_maps_to_scalar() {
        let lm = ModelParams::init(&ModelConfig::tiny(), 0).unwrap();
        let rm = RewardModelParams::from_lm(&lm);
        assert_eq!(rm.head.shape(), &[16, 1]);
        assert_eq!(rm.trunk, lm.trunk);
    }

    #[test]
    fn init_is_seeded() {
        let a = ModelParams::init(&ModelConfig::tiny(), 7).unwrap();
        let b = ModelParams::init(&ModelConfig::tiny(), 7).unwrap();
        let c = ModelParams::init(&ModelConfig::tiny(), 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn bound_ids_follow_names() {
        let p = ModelParams::init(&ModelConfig::tiny(), 0).unwrap();
        let mut g = Graph::new();
        let b = p.bind(&mut g);
        let ids = b.ids();
        let names = p.named_tensors();
        assert_eq!(ids.len(), names.len());
        for (id, (_, t)) in ids.iter().zip(&names) {
            assert_eq!(g.value(*id).data(), t.data());
        }
    }
}
