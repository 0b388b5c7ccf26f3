//! Flat TOML stage configuration.
//!
//! Every key is optional. Command-line flags override file values, which
//! override the stage defaults. Relative paths in a file resolve against the
//! directory containing that file.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use offalign_core::align::{AlignConfig, AlignMethod};
use offalign_core::pipeline::TrainConfig;
use offalign_core::ModelConfig;
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,

    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
    pub grad_clip_norm: Option<f64>,

    pub d_model: Option<usize>,
    pub n_heads: Option<usize>,
    pub n_layers: Option<usize>,
    pub d_ff: Option<usize>,
    pub max_seq_len: Option<usize>,
    pub rope_base: Option<f64>,

    pub holdout_fraction: Option<f64>,

    pub method: Option<String>,
    pub t: Option<f64>,
    pub beta_rwr: Option<f64>,
    pub condition_score: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: Self = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.data, &mut cfg.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn model(&self) -> ModelConfig {
        let d = ModelConfig::default();
        ModelConfig {
            vocab_size: d.vocab_size,
            d_model: self.d_model.unwrap_or(d.d_model),
            n_heads: self.n_heads.unwrap_or(d.n_heads),
            n_layers: self.n_layers.unwrap_or(d.n_layers),
            d_ff: self.d_ff.unwrap_or(d.d_ff),
            max_seq_len: self.max_seq_len.unwrap_or(d.max_seq_len),
            rope_base: self.rope_base.unwrap_or(d.rope_base),
        }
    }
}

/// Training flags shared by every training subcommand.
#[derive(Debug, Default, clap::Args)]
pub struct TrainFlags {
    /// Flat TOML config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Input dataset (JSONL).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output checkpoint path; the manifest is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

/// A resolved training stage: data, output and optimizer settings.
pub struct Stage {
    pub data: PathBuf,
    pub train: TrainConfig,
}

impl TrainFlags {
    pub fn resolve(&self, file: &FileConfig, defaults: TrainConfig) -> Result<Stage> {
        let data = self
            .data
            .clone()
            .or_else(|| file.data.clone())
            .context("no input dataset: pass --data or set `data` in the config")?;
        let out = self
            .out
            .clone()
            .or_else(|| file.out.clone())
            .context("no output path: pass --out or set `out` in the config")?;
        let train = TrainConfig {
            learning_rate: self
                .learning_rate
                .or(file.learning_rate)
                .unwrap_or(defaults.learning_rate),
            batch_size: self.batch_size.or(file.batch_size).unwrap_or(defaults.batch_size),
            epochs: self.epochs.or(file.epochs).unwrap_or(defaults.epochs),
            seed: self.seed.or(file.seed).unwrap_or(defaults.seed),
            grad_clip_norm: file.grad_clip_norm.unwrap_or(defaults.grad_clip_norm),
            checkpoint_path: Some(out),
        };
        train.validate()?;
        Ok(Stage { data, train })
    }
}

/// Alignment settings: `method` comes from the flag or the file, the rest
/// from the file over [`AlignConfig::new`].
pub fn align_config(flag: Option<AlignMethod>, t: Option<f64>, file: &FileConfig) -> Result<AlignConfig> {
    let method = match (flag, &file.method) {
        (Some(m), _) => m,
        (None, Some(s)) => s.parse()?,
        (None, None) => anyhow::bail!("no alignment method: pass --method or set `method` in the config"),
    };
    let d = AlignConfig::new(method);
    let cfg = AlignConfig {
        method,
        t: t.or(file.t).unwrap_or(d.t),
        beta_rwr: file.beta_rwr.unwrap_or(d.beta_rwr),
        condition_score: file.condition_score.unwrap_or(d.condition_score),
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> FileConfig {
        toml::from_str(text).unwrap()
    }

    #[test]
    fn flag_over_file_over_default() {
        let file = parse("data = \"d.jsonl\"\nout = \"o.ckpt\"\nepochs = 7\nseed = 3\nlearning_rate = 0.01\n");
        let flags = TrainFlags {
            seed: Some(9),
            ..TrainFlags::default()
        };
        let s = flags.resolve(&file, TrainConfig::sft()).unwrap();
        assert_eq!(s.train.seed, 9);
        assert_eq!(s.train.epochs, 7);
        assert_eq!(s.train.learning_rate, 0.01);
        assert_eq!(s.train.batch_size, TrainConfig::sft().batch_size);
        assert_eq!(s.train.checkpoint_path.as_deref(), Some(Path::new("o.ckpt")));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<FileConfig>("lr = 1.0").is_err());
    }

    #[test]
    fn missing_paths_are_errors() {
        assert!(TrainFlags::default()
            .resolve(&FileConfig::default(), TrainConfig::sft())
            .is_err());
    }

    #[test]
    fn method_from_file_or_flag() {
        let file = parse("method = \"rwr\"\nt = -inf\nbeta_rwr = 2.0");
        let c = align_config(None, None, &file).unwrap();
        assert_eq!((c.method, c.t, c.beta_rwr), (AlignMethod::Rwr, f64::NEG_INFINITY, 2.0));
        assert_eq!(align_config(Some(AlignMethod::Ca), Some(0.5), &file).unwrap().t, 0.5);
        let bad = parse("method = \"xyz\"");
        let err = align_config(None, None, &bad).unwrap_err().to_string();
        assert!(err.contains("fa, rwr, ca"), "{err}");
        assert!(align_config(None, None, &FileConfig::default()).is_err());
    }

    #[test]
    fn model_keys_override_defaults() {
        let m = parse("d_model = 16\nn_layers = 2").model();
        assert_eq!(
            (m.d_model, m.n_layers, m.n_heads),
            (16, 2, ModelConfig::default().n_heads)
        );
    }
}
