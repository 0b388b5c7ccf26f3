//! Synthetic digit-sorting task with an exactly computable reward.
//!
//! Instructions look like `sort: 3 1 2` (distinct digits); the ideal response
//! is `1 2 3`. Demonstrations mix the ideal answer with systematic
//! corruptions so that the most frequent behaviour in the data is *not* the
//! best one, which is what gives reward-aware fine-tuning room to improve
//! over plain imitation.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::records::{EvalPrompt, PreferencePair, Sample};
use crate::error::{Error, Result};

const PREFIX: &str = "sort:";

/// Kinds of responses the generator can write for an instruction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseKind {
    Ideal,
    /// The input digits repeated in their original order.
    Echo,
    /// Sorted in descending order.
    Descending,
    /// Sorted, with one adjacent pair swapped.
    Swap,
}

impl ResponseKind {
    pub const ALL: [ResponseKind; 4] = [Self::Ideal, Self::Echo, Self::Descending, Self::Swap];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskConfig {
    pub min_digits: usize,
    pub max_digits: usize,
    /// Number of held-out evaluation prompts.
    pub n_eval: usize,
    /// Demonstration mixture weights, in [`ResponseKind::ALL`] order.
    pub sft_mixture: [f64; 4],
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            min_digits: 3,
            max_digits: 8,
            n_eval: 200,
            sft_mixture: [0.25, 0.5, 0.1, 0.15],
        }
    }
}

impl TaskConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_digits < 2 || self.max_digits > 10 || self.min_digits > self.max_digits {
            return Err(Error::Config(format!(
                "digit counts must satisfy 2 <= min <= max <= 10, got {}..={}",
                self.min_digits, self.max_digits
            )));
        }
        if self.sft_mixture.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || self.sft_mixture.iter().sum::<f64>() <= 0.0
        {
            return Err(Error::Config(
                "sft_mixture must be non-negative with a positive sum".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthData {
    pub sft: Vec<Sample>,
    pub pairs: Vec<PreferencePair>,
    pub eval_prompts: Vec<EvalPrompt>,
}

fn join(digits: &[u8]) -> String {
    digits.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn instruction_for(digits: &[u8]) -> String {
    format!("{PREFIX} {}", join(digits))
}

/// Parses the digits of a `sort: ...` instruction.
pub fn parse_instruction(instruction: &str) -> Result<Vec<u32>> {
    let rest = instruction
        .trim()
        .strip_prefix(PREFIX)
        .ok_or_else(|| Error::Unparseable(instruction.to_owned()))?;
    let digits: Vec<u32> = rest
        .split_whitespace()
        .map(|t| t.parse::<u32>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Unparseable(instruction.to_owned()))?;
    if digits.is_empty() {
        return Err(Error::Unparseable(instruction.to_owned()));
    }
    Ok(digits)
}

pub fn ideal_response(instruction: &str) -> Result<String> {
    let mut d = parse_instruction(instruction)?;
    d.sort_unstable();
    Ok(d.iter().map(u32::to_string).collect::<Vec<_>>().join(" "))
}

/// Fraction of positions of the ideal answer reproduced by `response`,
/// normalized by the longer of the two token lists so padding the answer
/// with extra tokens is penalized. Always in `[0, 1]`.
pub fn oracle_reward(instruction: &str, response: &str) -> Result<f64> {
    let ideal = ideal_response(instruction)?;
    let ideal: Vec<&str> = ideal.split_whitespace().collect();
    let got: Vec<&str> = response.split_whitespace().collect();
    let matched = ideal.iter().zip(&got).filter(|(a, b)| a == b).count();
    Ok(matched as f64 / ideal.len().max(got.len()) as f64)
}

fn respond(digits: &[u8], kind: ResponseKind, rng: &mut ChaCha8Rng) -> String {
    let mut sorted = digits.to_vec();
    sorted.sort_unstable();
    let out = match kind {
        ResponseKind::Ideal => sorted,
        ResponseKind::Echo => digits.to_vec(),
        ResponseKind::Descending => {
            sorted.reverse();
            sorted
        }
        ResponseKind::Swap => {
            let i = rng.gen_range(0..sorted.len() - 1);
            sorted.swap(i, i + 1);
            sorted
        }
    };
    join(&out)
}

fn draw_digits(cfg: &TaskConfig, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let k = rng.gen_range(cfg.min_digits..=cfg.max_digits);
    let mut pool: Vec<u8> = (0..10).collect();
    pool.shuffle(rng);
    pool.truncate(k);
    pool
}

fn pick_kind(weights: &[f64; 4], rng: &mut ChaCha8Rng) -> ResponseKind {
    let total: f64 = weights.iter().sum();
    let mut x = rng.gen::<f64>() * total;
    for (w, k) in weights.iter().zip(ResponseKind::ALL) {
        if x < *w {
            return k;
        }
        x -= w;
    }
    ResponseKind::ALL[weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)]
}

/// Kind combinations used for preference pairs: each pairs a better-quality
/// family with a worse one.
const PAIR_KINDS: [(ResponseKind, ResponseKind); 5] = [
    (ResponseKind::Ideal, ResponseKind::Swap),
    (ResponseKind::Ideal, ResponseKind::Echo),
    (ResponseKind::Ideal, ResponseKind::Descending),
    (ResponseKind::Swap, ResponseKind::Echo),
    (ResponseKind::Swap, ResponseKind::Descending),
];

/// Generates `n` demonstrations, `n` preference pairs and
/// `cfg.n_eval` held-out prompts. Output depends only on `(cfg, n, seed)`.
pub fn synth_generate(cfg: &TaskConfig, n: usize, seed: u64) -> Result<SynthData> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut sft = Vec::with_capacity(n);
    for _ in 0..n {
        let digits = draw_digits(cfg, &mut rng);
        let kind = pick_kind(&cfg.sft_mixture, &mut rng);
        sft.push(Sample {
            instruction: instruction_for(&digits),
            response: respond(&digits, kind, &mut rng),
        });
    }

    let mut pairs = Vec::with_capacity(n);
    while pairs.len() < n {
        let digits = draw_digits(cfg, &mut rng);
        let instruction = instruction_for(&digits);
        let (ka, kb) = PAIR_KINDS[rng.gen_range(0..PAIR_KINDS.len())];
        let a = respond(&digits, ka, &mut rng);
        let b = respond(&digits, kb, &mut rng);
        let (ra, rb) = (oracle_reward(&instruction, &a)?, oracle_reward(&instruction, &b)?);
        if ra == rb {
            continue;
        }
        let (chosen, rejected) = if ra > rb { (a, b) } else { (b, a) };
        pairs.push(PreferencePair {
            instruction,
            chosen,
            rejected,
        });
    }

    let seen: HashSet<&str> = sft
        .iter()
        .map(|s| s.instruction.as_str())
        .chain(pairs.iter().map(|p| p.instruction.as_str()))
        .collect();
    let mut eval_set = HashSet::new();
    let mut eval_prompts = Vec::with_capacity(cfg.n_eval);
    let mut attempts = 0usize;
    while eval_prompts.len() < cfg.n_eval {
        attempts += 1;
        if attempts > 1000 * (cfg.n_eval + 1) {
            return Err(Error::Config("could not find enough held-out prompts".into()));
        }
        let instruction = instruction_for(&draw_digits(cfg, &mut rng));
        if seen.contains(instruction.as_str()) || !eval_set.insert(instruction.clone()) {
            continue;
        }
        eval_prompts.push(EvalPrompt { instruction });
    }

    Ok(SynthData {
        sft,
        pairs,
        eval_prompts,
    })
}
