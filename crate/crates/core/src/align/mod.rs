//! Reward normalization and the alignment losses.

mod losses;
mod normalize;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use losses::{
    alignment_objective, ca_inputs, ca_loss, ca_sequences, evaluate, fa_filter, fa_inputs, fa_loss, response_logprobs,
    rm_pair_loss, rm_pair_rewards, rm_ranking_loss, rwr_inputs, rwr_loss, rwr_weight, sft_loss, token_nll_values,
    value_and_grad, weighted_nll, PPOObjectiveConfig, Supervision, RWR_CLAMP,
};
pub use normalize::{normalize_rewards, Normalized, RewardStats, DEGENERATE_STD};

use crate::data::{LabeledSample, TokenSeq};
use crate::error::{Error, Result};
use crate::model::{Bound, ModelConfig};
use crate::numerics::{Graph, NodeId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlignMethod {
    /// Filtering: SFT on samples above a reward threshold.
    Fa,
    /// Reward-weighted regression.
    Rwr,
    /// Conditional alignment on a `<rm_score>` prompt span.
    Ca,
}

impl AlignMethod {
    pub const ALL: [AlignMethod; 3] = [Self::Fa, Self::Rwr, Self::Ca];

    pub fn name(self) -> &'static str {
        match self {
            Self::Fa => "fa",
            Self::Rwr => "rwr",
            Self::Ca => "ca",
        }
    }
}

impl fmt::Display for AlignMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlignMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown alignment method {s:?}; valid methods are fa, rwr, ca")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignConfig {
    pub method: AlignMethod,
    /// FA threshold on the normalized reward.
    pub t: f64,
    /// RWR temperature.
    pub beta_rwr: f64,
    /// Score used to condition CA generation.
    pub condition_score: f64,
}

impl AlignConfig {
    pub fn new(method: AlignMethod) -> Self {
        Self {
            method,
            t: 0.0,
            beta_rwr: 5.0,
            condition_score: 5.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta_rwr > 0.0 && self.beta_rwr.is_finite()) {
            return Err(Error::Config(format!(
                "beta_rwr must be positive, got {}",
                self.beta_rwr
            )));
        }
        if self.t.is_nan() {
            return Err(Error::Config("t must not be NaN".into()));
        }
        if !self.condition_score.is_finite() {
            return Err(Error::Config(format!(
                "condition_score must be finite, got {}",
                self.condition_score
            )));
        }
        Ok(())
    }

    /// Training sequences and per-sequence weights for a minibatch.
    pub fn inputs(&self, batch: &[LabeledSample]) -> Result<(Vec<TokenSeq>, Vec<f64>)> {
        match self.method {
            AlignMethod::Fa => fa_inputs(batch, self.t),
            AlignMethod::Rwr => rwr_inputs(batch, self.beta_rwr),
            AlignMethod::Ca => ca_inputs(batch),
        }
    }

    /// Records the configured method's loss on `g`.
    pub fn loss(&self, g: &mut Graph, cfg: &ModelConfig, bound: &Bound, batch: &[LabeledSample]) -> Result<NodeId> {
        let (seqs, w) = self.inputs(batch)?;
        weighted_nll(g, cfg, bound, &seqs, &w)
    }
}
