//! Chat and score-conditioned prompt templates.

use super::records::Sample;
use super::tokenizer::{tokenize, tokenize_str, EOS, RM_SCORE};
use crate::error::{Error, Result};

const USER: &str = "User: ";
const ASSISTANT: &str = " Assistant: ";

/// Token ids with a per-token loss mask (1 = supervised).
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct TokenSeq {
    pub ids: Vec<u32>,
    pub loss_mask: Vec<u8>,
}

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn supervised(&self) -> usize {
        self.loss_mask.iter().filter(|&&m| m != 0).count()
    }

    fn push(&mut self, ids: &[u32], mask: u8) {
        self.ids.extend_from_slice(ids);
        self.loss_mask.extend(std::iter::repeat_n(mask, ids.len()));
    }
}

/// Formats a conditioning score with one decimal, rounding half away from
/// zero. A value that rounds to zero prints as `0.0`.
pub fn format_score(score: f64) -> Result<String> {
    if !score.is_finite() {
        return Err(Error::NonFinite(format!("conditioning score {score}")));
    }
    let tenths = (score * 10.0).round() as i64;
    let sign = if tenths < 0 { "-" } else { "" };
    let a = tenths.unsigned_abs();
    Ok(format!("{sign}{}.{}", a / 10, a % 10))
}

fn prefix(seq: &mut TokenSeq, instruction: &str) {
    seq.push(&tokenize_str(USER), 0);
    seq.push(&tokenize_str(instruction), 0);
    seq.push(&tokenize_str(ASSISTANT), 0);
}

fn score_span(seq: &mut TokenSeq, score: f64) -> Result<()> {
    seq.push(&[RM_SCORE], 0);
    let text = format!(" {} ", format_score(score)?);
    seq.push(&tokenize(text.as_bytes()), 0);
    Ok(())
}

/// `User: {instruction} Assistant: {response}<eos>`, supervised on the
/// response and the end-of-sequence token.
pub fn format_chat(s: &Sample) -> TokenSeq {
    let mut seq = TokenSeq::default();
    prefix(&mut seq, &s.instruction);
    seq.push(&tokenize_str(&s.response), 1);
    seq.push(&[EOS], 1);
    seq
}

/// `User: {instruction} Assistant: <rm_score> a.b {response}<eos>`. The score
/// span is conditioning context and is never supervised.
pub fn format_ca(s: &Sample, score: f64) -> Result<TokenSeq> {
    let mut seq = TokenSeq::default();
    prefix(&mut seq, &s.instruction);
    score_span(&mut seq, score)?;
    seq.push(&tokenize_str(&s.response), 1);
    seq.push(&[EOS], 1);
    Ok(seq)
}

/// Generation prompt (everything before the response), with an all-zero
/// mask. `score` adds the conditioning span.
pub fn render_prompt(instruction: &str, score: Option<f64>) -> Result<TokenSeq> {
    let mut seq = TokenSeq::default();
    prefix(&mut seq, instruction);
    if let Some(s) = score {
        score_span(&mut seq, s)?;
    }
    Ok(seq)
}
