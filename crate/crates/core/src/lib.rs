//! Offline alignment of a tiny decoder-only language model.
//!
//! The crate covers the whole offline pipeline: supervised fine-tuning,
//! pairwise reward-model training, dataset labeling with normalized rewards,
//! and fine-tuning with filtering (FA), reward-weighted regression (RWR) or
//! score-conditioned training (CA), followed by greedy generation and
//! rank-based evaluation. Everything runs on the CPU in `f64` on top of a
//! small reverse-mode autodiff tape.

pub mod align;
pub mod data;
mod error;
pub mod eval;
pub mod gradcheck;
pub mod inference;
pub mod model;
pub mod numerics;
pub mod pipeline;

pub use error::{Error, Result};
pub use model::{Checkpoint, CheckpointMeta, ModelConfig, ModelParams, Parameterized, RewardModelParams};
pub use numerics::Tensor;
