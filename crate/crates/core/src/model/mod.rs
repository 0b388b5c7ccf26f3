//! Decoder-only transformer (RMS pre-norm, rotary attention, SwiGLU, no
//! biases, untied unembedding) and its scalar-head reward variant.

mod checkpoint;
mod config;
mod forward;
mod params;

pub use checkpoint::{sha256_hex, Checkpoint, CheckpointMeta, ModelKind};
pub use config::ModelConfig;
pub use forward::{
    lm_forward, lm_logits, next_token_logits, rm_forward, rm_forward_batch, rm_rewards, rope_apply, swiglu,
    swiglu_node, trunk_forward, PackedBatch,
};
pub use params::{Block, BlockIds, Bound, ModelParams, Parameterized, RewardModelParams, Trunk, TrunkIds};
