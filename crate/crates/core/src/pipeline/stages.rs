use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::TrainConfig;
use super::manifest::{dataset_fingerprint, manifest_path, CheckpointRef, RunManifest};
use super::train::{train_loop, TrainLog};
use crate::align::{
    alignment_objective, evaluate, fa_filter, normalize_rewards, rm_pair_loss, sft_loss, AlignConfig, AlignMethod,
    PPOObjectiveConfig, RewardStats,
};
use crate::data::{format_chat, load_jsonl, save_jsonl, LabeledSample, PreferencePair, Sample, TokenSeq};
use crate::error::{Error, Result};
use crate::model::{
    rm_forward_batch, Checkpoint, CheckpointMeta, ModelConfig, ModelParams, Parameterized, RewardModelParams,
};

/// Sequences scored per forward pass when labeling or measuring accuracy.
const EVAL_CHUNK: usize = 32;
/// Samples used for the KL-regularized objective reported after alignment.
const OBJECTIVE_SAMPLES: usize = 64;

/// Trained parameters plus the manifest describing the run.
#[derive(Clone, Debug)]
pub struct StageOutput<P> {
    pub params: P,
    pub manifest: RunManifest,
    pub log: TrainLog,
}

fn record_log(m: &mut RunManifest, log: &TrainLog) -> Result<()> {
    m.metric("steps", log.steps)?;
    m.metric("skipped_steps", log.skipped)?;
    m.metric("initial_loss", log.first_loss())?;
    m.metric("final_loss", log.final_loss())?;
    m.metric("tail_loss", log.tail_mean(10))?;
    m.metric("loss_curve", &log.losses)?;
    Ok(())
}

/// Writes the checkpoint and its manifest when `cfg.checkpoint_path` is set.
fn persist(cfg: &TrainConfig, ck: Checkpoint, manifest: &mut RunManifest) -> Result<()> {
    let Some(path) = &cfg.checkpoint_path else {
        return Ok(());
    };
    let sha256 = ck.save(path)?;
    manifest.checkpoint = Some(CheckpointRef {
        path: path.clone(),
        sha256,
    });
    manifest.save(&manifest_path(path))
}

/// Supervised fine-tuning of a freshly initialized model (seeded by
/// `cfg.seed`) on chat-formatted demonstrations.
pub fn train_sft(cfg: &TrainConfig, model: &ModelConfig, data: &[Sample]) -> Result<StageOutput<ModelParams>> {
    cfg.validate()?;
    model.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyInput("sft dataset"));
    }
    let seqs: Vec<TokenSeq> = data.iter().map(format_chat).collect();
    let mut params = ModelParams::init(model, cfg.seed)?;
    let log = train_loop(&mut params, &seqs, cfg, sft_loss)?;

    let mut manifest = RunManifest::new(
        "sft",
        json!({ "train": cfg, "model": model }),
        dataset_fingerprint(data)?,
    );
    record_log(&mut manifest, &log)?;
    manifest.metric("num_params", params.num_params())?;
    let meta = CheckpointMeta {
        stage: "sft".into(),
        method: None,
        score_conditioned: false,
    };
    persist(
        cfg,
        Checkpoint::Lm {
            params: params.clone(),
            meta,
        },
        &mut manifest,
    )?;
    Ok(StageOutput { params, manifest, log })
}

/// Fraction of pairs where the chosen response scores higher; ties count half.
pub fn pairwise_accuracy(rm: &RewardModelParams, pairs: &[PreferencePair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("pairs"));
    }
    let mut score = 0.0;
    for chunk in pairs.chunks(EVAL_CHUNK) {
        let chosen: Vec<Vec<u32>> = chunk.iter().map(|p| format_chat(&p.chosen_sample()).ids).collect();
        let rejected: Vec<Vec<u32>> = chunk.iter().map(|p| format_chat(&p.rejected_sample()).ids).collect();
        let rw = rm_forward_batch(rm, &chosen)?;
        let rl = rm_forward_batch(rm, &rejected)?;
        for (w, l) in rw.iter().zip(&rl) {
            score += match w.partial_cmp(l) {
                Some(std::cmp::Ordering::Greater) => 1.0,
                Some(std::cmp::Ordering::Equal) => 0.5,
                _ => 0.0,
            };
        }
    }
    Ok(score / pairs.len() as f64)
}

/// Reward-model training from an SFT trunk with a zero-initialized head.
/// Accuracy is measured on `heldout`.
pub fn train_rm(
    cfg: &TrainConfig,
    pairs: &[PreferencePair],
    heldout: &[PreferencePair],
    init: &ModelParams,
) -> Result<StageOutput<RewardModelParams>> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::EmptyInput("preference dataset"));
    }
    let mut rm = RewardModelParams::from_lm(init);
    let log = train_loop(&mut rm, pairs, cfg, rm_pair_loss)?;

    let mut manifest = RunManifest::new("rm", json!({ "train": cfg }), dataset_fingerprint(pairs)?);
    record_log(&mut manifest, &log)?;
    if !heldout.is_empty() {
        let acc = pairwise_accuracy(&rm, heldout)?;
        log::info!("held-out pairwise accuracy {acc:.4} on {} pairs", heldout.len());
        manifest.metric("heldout_accuracy", acc)?;
        manifest.metric("heldout_pairs", heldout.len())?;
    }
    let meta = CheckpointMeta {
        stage: "rm".into(),
        method: None,
        score_conditioned: false,
    };
    persist(
        cfg,
        Checkpoint::Rm {
            params: rm.clone(),
            meta,
        },
        &mut manifest,
    )?;
    Ok(StageOutput {
        params: rm,
        manifest,
        log,
    })
}

/// Splits off the last `fraction` of a seeded permutation as a held-out set.
pub fn split_holdout<T: Clone>(rows: &[T], fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Config(format!(
            "holdout fraction must be in [0, 1), got {fraction}"
        )));
    }
    let mut idx: Vec<usize> = (0..rows.len()).collect();
    idx.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
    let n_hold = (rows.len() as f64 * fraction).round() as usize;
    let (train, hold) = idx.split_at(rows.len() - n_hold);
    Ok((
        train.iter().map(|&i| rows[i].clone()).collect(),
        hold.iter().map(|&i| rows[i].clone()).collect(),
    ))
}

/// A reward-labeled dataset with the statistics used to normalize it.
#[derive(Clone, Debug, PartialEq)]
pub struct Labeled {
    pub samples: Vec<LabeledSample>,
    pub stats: RewardStats,
    pub degenerate: bool,
}

/// Contents of the `*.stats.json` file written next to labeled data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsFile {
    #[serde(flatten)]
    pub stats: RewardStats,
    pub degenerate: bool,
}

/// Scores every sample with the reward model and normalizes with
/// statistics of the whole dataset.
pub fn label_dataset(rm: &RewardModelParams, samples: &[Sample]) -> Result<Labeled> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("samples to label"));
    }
    let mut raw = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(EVAL_CHUNK) {
        let seqs: Vec<Vec<u32>> = chunk.iter().map(|s| format_chat(s).ids).collect();
        raw.extend(rm_forward_batch(rm, &seqs)?);
    }
    let norm = normalize_rewards(&raw)?;
    let samples = samples
        .iter()
        .zip(raw.iter().zip(&norm.values))
        .map(|(s, (&r, &n))| LabeledSample {
            instruction: s.instruction.clone(),
            response: s.response.clone(),
            raw_reward: r,
            norm_reward: n,
        })
        .collect();
    Ok(Labeled {
        samples,
        stats: norm.stats,
        degenerate: norm.degenerate,
    })
}

/// `labeled.jsonl` -> `labeled.stats.json`.
pub fn stats_path(labeled: &Path) -> PathBuf {
    labeled.with_extension("stats.json")
}

pub fn save_labeled(path: &Path, labeled: &Labeled) -> Result<PathBuf> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    save_jsonl(&labeled.samples, path)?;
    let sp = stats_path(path);
    let file = StatsFile {
        stats: labeled.stats.clone(),
        degenerate: labeled.degenerate,
    };
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    fs::write(&sp, text).map_err(|e| Error::io(&sp, e))?;
    Ok(sp)
}

/// Loads labeled data; fails with [`Error::MissingStats`] when the stats file
/// from the labeling stage is absent.
pub fn load_labeled(path: &Path) -> Result<(Vec<LabeledSample>, RewardStats)> {
    let sp = stats_path(path);
    if !sp.is_file() {
        return Err(Error::MissingStats(sp));
    }
    let text = fs::read_to_string(&sp).map_err(|e| Error::io(&sp, e))?;
    let file: StatsFile = serde_json::from_str(&text)?;
    Ok((load_jsonl(path)?, file.stats))
}

/// Fine-tunes a copy of the SFT model with the configured offline method.
/// `stats` are the statistics the dataset was normalized with.
pub fn align_finetune(
    cfg: &TrainConfig,
    acfg: &AlignConfig,
    data: &[LabeledSample],
    stats: &RewardStats,
    init: &ModelParams,
) -> Result<StageOutput<ModelParams>> {
    cfg.validate()?;
    acfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyInput("labeled dataset"));
    }
    if stats.count != data.len() {
        log::warn!("reward stats cover {} samples, dataset has {}", stats.count, data.len());
    }
    let mut params = init.clone();
    let log = train_loop(&mut params, data, cfg, |g, c, b, batch| acfg.loss(g, c, b, batch))?;

    let mut manifest = RunManifest::new(
        "align",
        json!({ "train": cfg, "align": acfg, "reward_stats": stats }),
        dataset_fingerprint(data)?,
    );
    record_log(&mut manifest, &log)?;
    manifest.metric("method", acfg.method)?;
    if acfg.method == AlignMethod::Fa {
        let kept = fa_filter(data, acfg.t).len();
        manifest.metric("filtered_fraction", kept as f64 / data.len() as f64)?;
    }
    let probe = &data[..data.len().min(OBJECTIVE_SAMPLES)];
    let obj = PPOObjectiveConfig::default();
    let value = evaluate(&params, |g, c, b| alignment_objective(g, c, b, init, probe, &obj))?;
    manifest.metric("kl_objective", value)?;
    manifest.metric("kl_objective_beta", obj.beta_kl)?;

    let meta = CheckpointMeta {
        stage: "align".into(),
        method: Some(acfg.method.to_string()),
        score_conditioned: acfg.method == AlignMethod::Ca,
    };
    persist(
        cfg,
        Checkpoint::Lm {
            params: params.clone(),
            meta,
        },
        &mut manifest,
    )?;
    Ok(StageOutput { params, manifest, log })
}
