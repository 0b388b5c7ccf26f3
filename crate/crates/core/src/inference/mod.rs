//! Greedy decoding.

use crate::data::{detokenize_lossy, render_prompt, TokenSeq, EOS};
use crate::error::{Error, Result};
use crate::model::{next_token_logits, ModelParams, Parameterized};

/// Generation cap used by evaluation; the longest ideal synthetic response
/// plus EOS is 16 tokens.
pub const DEFAULT_MAX_NEW_TOKENS: usize = 24;

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Greedily extends `prompt` by at most `max_new_tokens` ids, stopping
/// before EOS. The returned ids never include EOS.
pub fn greedy_tokens(params: &ModelParams, prompt: &[u32], max_new_tokens: usize) -> Result<Vec<u32>> {
    let max = params.config().max_seq_len;
    if prompt.is_empty() {
        return Err(Error::EmptySequence);
    }
    if prompt.len() + max_new_tokens > max {
        return Err(Error::SequenceTooLong {
            len: prompt.len() + max_new_tokens,
            max,
        });
    }
    let mut ids = prompt.to_vec();
    let mut out = Vec::new();
    for _ in 0..max_new_tokens {
        let next = argmax(&next_token_logits(params, &ids)?) as u32;
        if next == EOS {
            break;
        }
        ids.push(next);
        out.push(next);
    }
    Ok(out)
}

/// Greedy response text for a rendered prompt.
pub fn greedy_generate(params: &ModelParams, prompt: &TokenSeq, max_new_tokens: usize) -> Result<String> {
    Ok(detokenize_lossy(&greedy_tokens(params, &prompt.ids, max_new_tokens)?))
}

/// Largest generation budget that fits after `prompt` (capped at `cap`).
pub fn budget(params: &ModelParams, prompt: &TokenSeq, cap: usize) -> usize {
    params.config().max_seq_len.saturating_sub(prompt.len()).min(cap)
}

/// Response to a plain chat prompt.
pub fn chat_generate(params: &ModelParams, instruction: &str, max_new_tokens: usize) -> Result<String> {
    let prompt = render_prompt(instruction, None)?;
    let n = budget(params, &prompt, max_new_tokens);
    greedy_generate(params, &prompt, n)
}

/// Response to a prompt carrying the `<rm_score> a.b` span.
pub fn ca_generate(
    params: &ModelParams,
    instruction: &str,
    condition_score: f64,
    max_new_tokens: usize,
) -> Result<String> {
    let prompt = render_prompt(instruction, Some(condition_score))?;
    let n = budget(params, &prompt, max_new_tokens);
    greedy_generate(params, &prompt, n)
}
