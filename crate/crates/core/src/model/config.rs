use serde::{Deserialize, Serialize};

use crate::data::VOCAB_SIZE;
use crate::error::{Error, Result};

/// Shape of the decoder-only transformer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub d_ff: usize,
    pub max_seq_len: usize,
    pub rope_base: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            vocab_size: VOCAB_SIZE,
            d_model: 64,
            n_heads: 4,
            n_layers: 4,
            d_ff: 128,
            max_seq_len: 256,
            rope_base: 10_000.0,
        }
    }
}

impl ModelConfig {
    /// The 2-layer, width-16 model used for gradient checks.
    pub fn tiny() -> Self {
        Self {
            d_model: 16,
            n_heads: 2,
            n_layers: 2,
            d_ff: 32,
            max_seq_len: 64,
            ..Self::default()
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("vocab_size", self.vocab_size),
            ("d_model", self.d_model),
            ("n_heads", self.n_heads),
            ("n_layers", self.n_layers),
            ("d_ff", self.d_ff),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::Config(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if !self.head_dim().is_multiple_of(2) {
            return Err(Error::Config(format!(
                "rotary embedding needs an even head dim, got {}",
                self.head_dim()
            )));
        }
        if self.max_seq_len < 2 {
            return Err(Error::Config("max_seq_len must be at least 2".into()));
        }
        if !(self.rope_base.is_finite() && self.rope_base > 1.0) {
            return Err(Error::Config(format!("rope_base must be > 1, got {}", self.rope_base)));
        }
        Ok(())
    }
}
