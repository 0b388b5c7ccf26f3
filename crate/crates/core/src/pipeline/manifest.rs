use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::data::to_jsonl;
use crate::error::{Error, Result};
use crate::model::sha256_hex;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRef {
    pub path: PathBuf,
    pub sha256: String,
}

/// Record written once per completed stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub stage: String,
    pub config: Value,
    /// SHA-256 of the training data in canonical JSONL form.
    pub dataset_fingerprint: String,
    pub metrics: Map<String, Value>,
    pub checkpoint: Option<CheckpointRef>,
}

impl RunManifest {
    pub fn new(stage: &str, config: Value, dataset_fingerprint: String) -> Self {
        Self {
            stage: stage.to_owned(),
            config,
            dataset_fingerprint,
            metrics: Map::new(),
            checkpoint: None,
        }
    }

    pub fn metric(&mut self, key: &str, value: impl Serialize) -> Result<()> {
        self.metrics.insert(key.to_owned(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// `model.ckpt` -> `model.ckpt.manifest.json`.
pub fn manifest_path(checkpoint: &Path) -> PathBuf {
    let mut s = checkpoint.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

pub fn dataset_fingerprint<T: Serialize>(rows: &[T]) -> Result<String> {
    Ok(sha256_hex(&to_jsonl(rows)?))
}
