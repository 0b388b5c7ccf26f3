//! The four offline stages (SFT, reward model, labeling, alignment), the
//! shared training loop and run manifests.

mod config;
mod manifest;
mod stages;
mod train;

pub use config::TrainConfig;
pub use manifest::{dataset_fingerprint, manifest_path, CheckpointRef, RunManifest};
pub use stages::{
    align_finetune, label_dataset, load_labeled, pairwise_accuracy, save_labeled, split_holdout, stats_path, train_rm,
    train_sft, Labeled, StageOutput, StatsFile,
};
pub use train::{train_loop, TrainLog};
