//! Versioned binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes   "OFALIGN\0"
//! version      u32       currently 1
//! header_len   u64       byte length of the JSON header
//! header       JSON      {"kind", "config", "meta", "tensors": [{"name", "shape"}]}
//! payload      f64 LE    every tensor's values, in header order, row-major
//! ```
//!
//! Writing the same parameters twice produces identical bytes.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ModelConfig;
use super::params::{ModelParams, Parameterized, RewardModelParams, Trunk};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

const MAGIC: &[u8; 8] = b"OFALIGN\0";
const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lm,
    Rm,
}

/// Provenance carried inside a checkpoint.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub stage: String,
    #[serde(default)]
    pub method: Option<String>,
    /// True when the model was trained on `<rm_score>`-conditioned sequences.
    #[serde(default)]
    pub score_conditioned: bool,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    kind: ModelKind,
    config: ModelConfig,
    meta: CheckpointMeta,
    tensors: Vec<TensorEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Checkpoint {
    Lm {
        params: ModelParams,
        meta: CheckpointMeta,
    },
    Rm {
        params: RewardModelParams,
        meta: CheckpointMeta,
    },
}

impl Checkpoint {
    pub fn meta(&self) -> &CheckpointMeta {
        match self {
            Checkpoint::Lm { meta, .. } | Checkpoint::Rm { meta, .. } => meta,
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Checkpoint::Lm { .. } => ModelKind::Lm,
            Checkpoint::Rm { .. } => ModelKind::Rm,
        }
    }

    pub fn into_lm(self) -> Result<(ModelParams, CheckpointMeta)> {
        match self {
            Checkpoint::Lm { params, meta } => Ok((params, meta)),
            Checkpoint::Rm { .. } => Err(Error::Checkpoint(
                "expected a language-model checkpoint, found a reward model".into(),
            )),
        }
    }

    pub fn into_rm(self) -> Result<(RewardModelParams, CheckpointMeta)> {
        match self {
            Checkpoint::Rm { params, meta } => Ok((params, meta)),
            Checkpoint::Lm { .. } => Err(Error::Checkpoint(
                "expected a reward-model checkpoint, found a language model".into(),
            )),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let (kind, meta, tensors) = match self {
            Checkpoint::Lm { params, meta } => (ModelKind::Lm, meta, params.named_tensors()),
            Checkpoint::Rm { params, meta } => (ModelKind::Rm, meta, params.named_tensors()),
        };
        let config = match self {
            Checkpoint::Lm { params, .. } => params.config().clone(),
            Checkpoint::Rm { params, .. } => params.config().clone(),
        };
        let header = Header {
            kind,
            config,
            meta: meta.clone(),
            tensors: tensors
                .iter()
                .map(|(name, t)| TensorEntry {
                    name: name.clone(),
                    shape: t.shape().to_vec(),
                })
                .collect(),
        };
        let header = serde_json::to_vec(&header)?;
        let payload: usize = tensors.iter().map(|(_, t)| t.numel() * 8).sum();
        let mut out = Vec::with_capacity(20 + header.len() + payload);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for (_, t) in &tensors {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_owned());
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint file (bad magic)"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let hlen = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let body = &bytes[20..];
        if body.len() < hlen {
            return Err(bad("truncated header"));
        }
        let header: Header = serde_json::from_slice(&body[..hlen])?;
        header.config.validate()?;
        let mut payload = &body[hlen..];

        let template = ModelParams::init(&header.config, 0)?;
        let expected: Vec<(String, Vec<usize>)> = {
            let mut v: Vec<_> = template.trunk_named().map(|(n, t)| (n, t.shape().to_vec())).collect();
            let last = match header.kind {
                ModelKind::Lm => ("unembed".to_owned(), template.unembed.shape().to_vec()),
                ModelKind::Rm => ("head".to_owned(), vec![header.config.d_model, 1]),
            };
            v.push(last);
            v
        };
        if expected.len() != header.tensors.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, header lists {}",
                expected.len(),
                header.tensors.len()
            )));
        }
        let mut named = Vec::with_capacity(expected.len());
        for ((name, shape), entry) in expected.into_iter().zip(&header.tensors) {
            if name != entry.name || shape != entry.shape {
                return Err(Error::Checkpoint(format!(
                    "tensor {} {:?} does not match expected {name} {shape:?}",
                    entry.name, entry.shape
                )));
            }
            let count: usize = shape.iter().product();
            let n = count * 8;
            if payload.len() < n {
                return Err(bad("truncated payload"));
            }
            let data = payload[..n]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            named.push(Tensor::new(shape, data)?);
            payload = &payload[n..];
        }
        if !payload.is_empty() {
            return Err(bad("trailing bytes after payload"));
        }
        let meta = header.meta;
        Ok(match header.kind {
            ModelKind::Lm => {
                let (trunk, last) = rebuild_trunk(&header.config, named);
                Checkpoint::Lm {
                    params: ModelParams { trunk, unembed: last },
                    meta,
                }
            }
            ModelKind::Rm => {
                let (trunk, last) = rebuild_trunk(&header.config, named);
                Checkpoint::Rm {
                    params: RewardModelParams { trunk, head: last },
                    meta,
                }
            }
        })
    }

    pub fn save(&self, path: &Path) -> Result<String> {
        let bytes = self.to_bytes()?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
        Ok(sha256_hex(&bytes))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// SHA-256 of the serialized checkpoint.
    pub fn fingerprint(&self) -> Result<String> {
        Ok(sha256_hex(&self.to_bytes()?))
    }
}

fn rebuild_trunk(config: &ModelConfig, tensors: Vec<Tensor>) -> (Trunk, Tensor) {
    use super::params::Block;
    let mut it = tensors.into_iter();
    let mut next = || it.next().expect("tensor count checked");
    let tok_embed = next();
    let blocks = (0..config.n_layers)
        .map(|_| Block {
            attn_norm: next(),
            wq: next(),
            wk: next(),
            wv: next(),
            wo: next(),
            ffn_norm: next(),
            w_gate: next(),
            w_up: next(),
            w_down: next(),
        })
        .collect();
    let final_norm = next();
    let last = next();
    (
        Trunk {
            config: config.clone(),
            tok_embed,
            blocks,
            final_norm,
        },
        last,
    )
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_lm_and_rm() {
        let lm = ModelParams::init(&ModelConfig::tiny(), 3).unwrap();
        let meta = CheckpointMeta {
            stage: "sft".into(),
            method: None,
            score_conditioned: false,
        };
        let ck = Checkpoint::Lm {
            params: lm.clone(),
            meta: meta.clone(),
        };
        let bytes = ck.to_bytes().unwrap();
        assert_eq!(Checkpoint::from_bytes(&bytes).unwrap(), ck);
        assert_eq!(bytes, ck.to_bytes().unwrap());

        let rm = Checkpoint::Rm {
            params: RewardModelParams::init(&ModelConfig::tiny(), 4).unwrap(),
            meta,
        };
        assert_eq!(Checkpoint::from_bytes(&rm.to_bytes().unwrap()).unwrap(), rm);
    }

    #[test]
    fn rejects_corruption() {
        let ck = Checkpoint::Lm {
            params: ModelParams::init(&ModelConfig::tiny(), 3).unwrap(),
            meta: CheckpointMeta::default(),
        };
        let mut bytes = ck.to_bytes().unwrap();
        bytes.pop();
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(Error::Checkpoint(_))));
        assert!(Checkpoint::from_bytes(b"garbage-garbage-garbage").is_err());
    }

    #[test]
    fn kind_mismatch_is_reported() {
        let ck = Checkpoint::Lm {
            params: ModelParams::init(&ModelConfig::tiny(), 3).unwrap(),
            meta: CheckpointMeta::default(),
        };
        assert!(ck.into_rm().is_err());
    }
}
