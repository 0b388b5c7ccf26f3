use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this sample standard deviation rewards are treated as constant.
pub const DEGENERATE_STD: f64 = 1e-12;

/// Dataset-level reward statistics, frozen at labeling time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardStats {
    pub mean: f64,
    /// Sample (n - 1) standard deviation; 0 for a single reward.
    pub std: f64,
    pub count: usize,
}

impl RewardStats {
    pub fn from_rewards(raw: &[f64]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::EmptyInput("rewards"));
        }
        if let Some(bad) = raw.iter().find(|r| !r.is_finite()) {
            return Err(Error::NonFinite(format!("reward {bad}")));
        }
        let n = raw.len();
        let mean = raw.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (raw.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Ok(Self { mean, std, count: n })
    }

    pub fn is_degenerate(&self) -> bool {
        self.std < DEGENERATE_STD
    }

    /// `(raw - mean) / std`, or 0 when the statistics are degenerate.
    pub fn normalize(&self, raw: f64) -> f64 {
        if self.is_degenerate() {
            0.0
        } else {
            (raw - self.mean) / self.std
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Normalized {
    pub values: Vec<f64>,
    pub stats: RewardStats,
    /// Set when the input was (numerically) constant and all outputs are 0.
    pub degenerate: bool,
}

/// Zero-centres rewards and scales them to unit sample standard deviation.
pub fn normalize_rewards(raw: &[f64]) -> Result<Normalized> {
    let stats = RewardStats::from_rewards(raw)?;
    let degenerate = stats.is_degenerate();
    if degenerate {
        log::warn!(
            "reward standard deviation {} below {DEGENERATE_STD}; normalized rewards set to zero",
            stats.std
        );
    }
    let mut values: Vec<f64> = raw.iter().map(|&r| stats.normalize(r)).collect();
    if !degenerate {
        // one correction pass removes the residual rounding in the mean
        let drift = values.iter().sum::<f64>() / values.len() as f64;
        values.iter_mut().for_each(|v| *v -= drift);
    }
    Ok(Normalized {
        values,
        stats,
        degenerate,
    })
}
