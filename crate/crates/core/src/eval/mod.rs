//! Rank scoring, oracle evaluation and judge-prompt rendering.

mod judge;
mod rank;
mod report;

pub use judge::render_judge_prompt;
pub use rank::rank_scores;
pub use report::{oracle_eval, Aggregate, EvalModel, EvalReport, ModelResult, PromptResult};
