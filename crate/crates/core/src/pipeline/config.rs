use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optimizer and loop settings shared by every training stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Global L2 norm bound applied to gradients before every update.
    pub grad_clip_norm: f64,
    /// Where the stage writes its checkpoint; the manifest goes next to it.
    pub checkpoint_path: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 16,
            epochs: 1,
            seed: 0,
            grad_clip_norm: 1.0,
            checkpoint_path: None,
        }
    }
}

impl TrainConfig {
    /// Toy-scale supervised fine-tuning defaults.
    pub fn sft() -> Self {
        Self {
            learning_rate: 2e-3,
            epochs: 3,
            ..Self::default()
        }
    }

    /// Reward-model defaults: one epoch, learning rate 1.8x the alignment rate.
    pub fn rm() -> Self {
        Self {
            learning_rate: 1.8 * Self::align().learning_rate,
            epochs: 1,
            ..Self::default()
        }
    }

    pub fn align() -> Self {
        Self {
            learning_rate: 5e-4,
            epochs: 2,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.grad_clip_norm.is_nan() || self.grad_clip_norm <= 0.0 {
            return Err(Error::Config(format!(
                "grad_clip_norm must be positive, got {}",
                self.grad_clip_norm
            )));
        }
        Ok(())
    }
}
