//! Tokenization, prompt templates, JSONL datasets and the synthetic task.

mod records;
mod synth;
mod template;
mod tokenizer;

pub use records::{
    load_jsonl, parse_jsonl, save_jsonl, to_jsonl, EvalPrompt, LabeledSample, PreferencePair, Record, Sample,
};
pub use synth::{
    ideal_response, instruction_for, oracle_reward, parse_instruction, synth_generate, ResponseKind, SynthData,
    TaskConfig,
};
pub use template::{format_ca, format_chat, format_score, render_prompt, TokenSeq};
pub use tokenizer::{
    detokenize, detokenize_lossy, tokenize, tokenize_str, BYTE_VOCAB, EOS, EOS_TEXT, RM_SCORE, RM_SCORE_TEXT,
    VOCAB_SIZE,
};
