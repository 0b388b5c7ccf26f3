use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::rank::rank_scores;
use crate::data::{oracle_reward, EvalPrompt};
use crate::error::{Error, Result};
use crate::inference::{ca_generate, chat_generate};
use crate::model::{Checkpoint, ModelParams};

/// A named model under evaluation. `condition_score` selects
/// score-conditioned generation.
#[derive(Clone, Debug)]
pub struct EvalModel {
    pub name: String,
    pub params: ModelParams,
    pub condition_score: Option<f64>,
}

impl EvalModel {
    /// Score-conditioned checkpoints are prompted with `condition_score`,
    /// all others with the plain chat prompt.
    pub fn from_checkpoint(name: &str, ck: Checkpoint, condition_score: f64) -> Result<Self> {
        let (params, meta) = ck.into_lm()?;
        Ok(Self {
            name: name.to_owned(),
            params,
            condition_score: meta.score_conditioned.then_some(condition_score),
        })
    }

    pub fn respond(&self, instruction: &str, max_new_tokens: usize) -> Result<String> {
        match self.condition_score {
            Some(s) => ca_generate(&self.params, instruction, s, max_new_tokens),
            None => chat_generate(&self.params, instruction, max_new_tokens),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    pub model: String,
    pub response: String,
    pub oracle_reward: f64,
    /// 1 = best; tied models share the average rank.
    pub rank: f64,
    pub rank_score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptResult {
    pub instruction: String,
    pub results: Vec<ModelResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub model: String,
    pub mean_oracle_reward: f64,
    pub mean_rank_score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub models: Vec<String>,
    pub prompts: Vec<PromptResult>,
    pub aggregates: Vec<Aggregate>,
}

impl EvalReport {
    pub fn aggregate(&self, model: &str) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.model == model)
    }

    /// Fixed-width table of the aggregates.
    pub fn summary(&self) -> String {
        let width = self.models.iter().map(String::len).max().unwrap_or(5).max(5);
        let mut s = String::new();
        let _ = writeln!(s, "{:<width$}  {:>12}  {:>10}", "model", "oracle_mean", "rank_score");
        for a in &self.aggregates {
            let _ = writeln!(
                s,
                "{:<width$}  {:>12.4}  {:>10.4}",
                a.model, a.mean_oracle_reward, a.mean_rank_score
            );
        }
        let _ = writeln!(s, "({} prompts, {} models)", self.prompts.len(), self.models.len());
        s
    }
}

/// Generates a response from every model for every prompt, scores it with
/// the oracle and ranks the models per prompt.
pub fn oracle_eval(models: &[EvalModel], prompts: &[EvalPrompt], max_new_tokens: usize) -> Result<EvalReport> {
    if models.len() < 2 {
        return Err(Error::Config(format!(
            "evaluation needs at least 2 models, got {}",
            models.len()
        )));
    }
    if prompts.is_empty() {
        return Err(Error::EmptyInput("eval prompts"));
    }
    for (i, m) in models.iter().enumerate() {
        if models[..i].iter().any(|o| o.name == m.name) {
            return Err(Error::Config(format!("duplicate model name {:?}", m.name)));
        }
    }
    let n = models.len() as f64;
    let mut per_prompt = Vec::with_capacity(prompts.len());
    for p in prompts {
        let mut responses = Vec::with_capacity(models.len());
        let mut rewards = Vec::with_capacity(models.len());
        for m in models {
            let r = m.respond(&p.instruction, max_new_tokens)?;
            rewards.push(oracle_reward(&p.instruction, &r)?);
            responses.push(r);
        }
        let scores = rank_scores(&rewards, true)?;
        let results = models
            .iter()
            .zip(responses)
            .zip(rewards.iter().zip(&scores))
            .map(|((m, response), (&oracle_reward, &rank_score))| ModelResult {
                model: m.name.clone(),
                response,
                oracle_reward,
                rank: n + 1.0 - rank_score,
                rank_score,
            })
            .collect();
        per_prompt.push(PromptResult {
            instruction: p.instruction.clone(),
            results,
        });
    }
    let count = prompts.len() as f64;
    let aggregates = models
        .iter()
        .enumerate()
        .map(|(i, m)| Aggregate {
            model: m.name.clone(),
            mean_oracle_reward: per_prompt.iter().map(|p| p.results[i].oracle_reward).sum::<f64>() / count,
            mean_rank_score: per_prompt.iter().map(|p| p.results[i].rank_score).sum::<f64>() / count,
        })
        .collect();
    Ok(EvalReport {
        models: models.iter().map(|m| m.name.clone()).collect(),
        prompts: per_prompt,
        aggregates,
    })
}
