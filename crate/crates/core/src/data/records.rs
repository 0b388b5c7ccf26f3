//! Dataset records and their JSONL encoding (one UTF-8 object per line).

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sample {
    pub instruction: String,
    pub response: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub instruction: String,
    pub chosen: String,
    pub rejected: String,
}

impl PreferencePair {
    pub fn chosen_sample(&self) -> Sample {
        Sample {
            instruction: self.instruction.clone(),
            response: self.chosen.clone(),
        }
    }

    pub fn rejected_sample(&self) -> Sample {
        Sample {
            instruction: self.instruction.clone(),
            response: self.rejected.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub instruction: String,
    pub response: String,
    pub raw_reward: f64,
    pub norm_reward: f64,
}

impl LabeledSample {
    pub fn sample(&self) -> Sample {
        Sample {
            instruction: self.instruction.clone(),
            response: self.response.clone(),
        }
    }
}

/// A held-out instruction used for evaluation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalPrompt {
    pub instruction: String,
}

/// A JSONL row type with record-level invariants.
pub trait Record: Serialize + DeserializeOwned {
    fn check(&self) -> std::result::Result<(), String>;
}

fn non_empty(field: &str, v: &str) -> std::result::Result<(), String> {
    if v.trim().is_empty() {
        Err(format!("field `{field}` is empty"))
    } else {
        Ok(())
    }
}

impl Record for Sample {
    fn check(&self) -> std::result::Result<(), String> {
        non_empty("instruction", &self.instruction)?;
        non_empty("response", &self.response)
    }
}

impl Record for PreferencePair {
    fn check(&self) -> std::result::Result<(), String> {
        non_empty("instruction", &self.instruction)?;
        non_empty("chosen", &self.chosen)?;
        non_empty("rejected", &self.rejected)?;
        if self.chosen == self.rejected {
            return Err("chosen and rejected responses are identical".into());
        }
        Ok(())
    }
}

impl Record for LabeledSample {
    fn check(&self) -> std::result::Result<(), String> {
        non_empty("instruction", &self.instruction)?;
        non_empty("response", &self.response)?;
        if !self.raw_reward.is_finite() || !self.norm_reward.is_finite() {
            return Err("rewards must be finite".into());
        }
        Ok(())
    }
}

impl Record for EvalPrompt {
    fn check(&self) -> std::result::Result<(), String> {
        non_empty("instruction", &self.instruction)
    }
}

/// Parses JSONL text. Blank lines are skipped; errors cite the 1-based line.
pub fn parse_jsonl<T: Record>(text: &str, path: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Jsonl {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let rec: T = serde_json::from_str(line).map_err(|e| {
            let kind = if e.is_data() { "schema error" } else { "malformed JSON" };
            err(format!("{kind}: {e}"))
        })?;
        rec.check().map_err(err)?;
        out.push(rec);
    }
    Ok(out)
}

pub fn load_jsonl<T: Record>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_jsonl(&text, path)
}

pub fn to_jsonl<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    Ok(buf)
}

pub fn save_jsonl<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&to_jsonl(rows)?).map_err(|e| Error::io(path, e))
}
