use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Number words used in the judge instructions; larger counts print as digits.
fn count_word(n: usize) -> String {
    const WORDS: [&str; 9] = ["two", "three", "four", "five", "six", "seven", "eight", "nine", "ten"];
    n.checked_sub(2)
        .and_then(|i| WORDS.get(i))
        .map_or_else(|| n.to_string(), |w| (*w).to_owned())
}

fn join_names(names: &[&str]) -> String {
    match names {
        [] => String::new(),
        [one] => (*one).to_owned(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

/// Prompt text asking an external judge to score every assistant from 1 to
/// 10. `responses` are `(name, answer)` in presentation order.
pub fn render_judge_prompt(question: &str, responses: &[(String, String)]) -> Result<String> {
    if responses.len() < 2 {
        return Err(Error::Config(format!(
            "a judge prompt needs at least 2 responses, got {}",
            responses.len()
        )));
    }
    let names: Vec<&str> = responses.iter().map(|(n, _)| n.as_str()).collect();
    for (i, n) in names.iter().enumerate() {
        if n.trim().is_empty() || names[..i].contains(n) {
            return Err(Error::Config(format!(
                "assistant names must be unique and non-empty, got {n:?}"
            )));
        }
    }
    let k = count_word(responses.len());
    let mut s = String::new();
    let _ = writeln!(
        s,
        "Please act as an impartial judge and evaluate the quality of the responses that {k} AI assistants gave to the user question below."
    );
    s.push_str(
        "Prefer the assistant that follows the user's instructions and answers the question better, \
         weighing helpfulness, relevance and level of detail.\n\n",
    );
    let _ = writeln!(s, "Start by comparing the {k} responses and give a short explanation.");
    s.push_str(
        "Do not let the order of presentation, the length of a response or the name of an assistant \
         influence your judgement. Be as objective as possible.\n",
    );
    s.push_str("After the explanation, give your final verdict in exactly this format:\n");
    s.push_str("{Assistant name}: {score}, where {score} ranges from 1 to 10.\n");
    s.push_str(
        "Answers may share a score, but separate them as much as you can. \
         List the scores one assistant at a time after all explanations.\n",
    );
    let _ = writeln!(
        s,
        "Below are the question and the answers of Assistant {}.\n",
        join_names(&names)
    );
    let _ = writeln!(s, "User Question:\n{question}\n");
    for (name, answer) in responses {
        let _ = writeln!(s, "The answer of Assistant {name}:\n{answer}\n");
    }
    Ok(s)
}
