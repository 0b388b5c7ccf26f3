mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use offalign_core::align::AlignMethod;
use offalign_core::data::{
    load_jsonl, parse_jsonl, save_jsonl, synth_generate, EvalPrompt, PreferencePair, Sample, TaskConfig,
};
use offalign_core::eval::{oracle_eval, render_judge_prompt, EvalModel};
use offalign_core::inference::{ca_generate, chat_generate, DEFAULT_MAX_NEW_TOKENS};
use offalign_core::pipeline::{
    align_finetune, label_dataset, load_labeled, manifest_path, save_labeled, split_holdout, train_rm, train_sft,
    TrainConfig,
};
use offalign_core::Checkpoint;
use serde::Deserialize;

use config::{align_config, FileConfig, TrainFlags};

#[derive(Parser)]
#[command(
    name = "offalign",
    version,
    about = "Offline alignment of a toy transformer: SFT, reward model, FA / RWR / CA"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic sorting task: sft.jsonl, pref.jsonl, eval_prompts.jsonl.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Number of demonstrations and of preference pairs.
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of held-out evaluation prompts.
        #[arg(long, default_value_t = TaskConfig::default().n_eval)]
        n_eval: usize,
    },
    /// Supervised fine-tuning from scratch on a demonstrations file.
    TrainSft(TrainFlags),
    /// Reward model from an SFT checkpoint on a preference-pair file.
    TrainRm {
        #[command(flatten)]
        flags: TrainFlags,
        /// SFT checkpoint whose trunk initializes the reward model.
        #[arg(long)]
        init: PathBuf,
        /// Fraction of pairs held out for the accuracy report.
        #[arg(long)]
        holdout_fraction: Option<f64>,
    },
    /// Score samples with a reward model and normalize over the whole set.
    Label {
        #[arg(long)]
        rm: PathBuf,
        /// Demonstration or preference-pair files; each pair contributes both responses.
        #[arg(long = "in", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Offline alignment of an SFT checkpoint on labeled data.
    Align {
        #[arg(long, value_parser = parse_method)]
        method: Option<AlignMethod>,
        #[command(flatten)]
        flags: TrainFlags,
        #[arg(long)]
        init: PathBuf,
        /// FA threshold on the normalized reward.
        #[arg(long, allow_hyphen_values = true)]
        t: Option<f64>,
    },
    /// Greedy response to one instruction.
    Generate {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        prompt: String,
        /// Condition score for score-conditioned (CA) checkpoints.
        #[arg(long, allow_hyphen_values = true)]
        score: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_MAX_NEW_TOKENS)]
        max_new_tokens: usize,
    },
    /// Oracle evaluation and per-prompt ranking of several checkpoints.
    Evaluate {
        /// NAME=CHECKPOINT, at least two.
        #[arg(long, required = true, num_args = 2.., value_parser = parse_named)]
        ckpts: Vec<(String, PathBuf)>,
        #[arg(long)]
        prompts: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Condition score used for CA checkpoints.
        #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
        score: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_NEW_TOKENS)]
        max_new_tokens: usize,
    },
    /// Print a judge prompt for manual scoring by an external assistant.
    JudgePrompt {
        #[arg(long)]
        question: String,
        /// JSONL rows `{"name": ..., "response": ...}` in presentation order.
        #[arg(long)]
        responses: PathBuf,
    },
}

fn parse_method(s: &str) -> Result<AlignMethod, String> {
    s.parse().map_err(|e: offalign_core::Error| e.to_string())
}

fn parse_named(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_owned(), PathBuf::from(path))),
        _ => Err(format!("expected NAME=CHECKPOINT, got {s:?}")),
    }
}

fn load_lm(path: &Path) -> Result<(offalign_core::ModelParams, offalign_core::CheckpointMeta)> {
    Checkpoint::load(path)?
        .into_lm()
        .with_context(|| format!("{} is not a language-model checkpoint", path.display()))
}

fn report_saved(out: &Path) {
    println!("checkpoint {}", out.display());
    println!("manifest {}", manifest_path(out).display());
}

fn synth(out: &Path, n: usize, seed: u64, n_eval: usize) -> Result<()> {
    let cfg = TaskConfig {
        n_eval,
        ..TaskConfig::default()
    };
    let data = synth_generate(&cfg, n, seed)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    save_jsonl(&data.sft, &out.join("sft.jsonl"))?;
    save_jsonl(&data.pairs, &out.join("pref.jsonl"))?;
    save_jsonl(&data.eval_prompts, &out.join("eval_prompts.jsonl"))?;
    println!(
        "wrote {} demonstrations, {} pairs, {} eval prompts to {}",
        data.sft.len(),
        data.pairs.len(),
        data.eval_prompts.len(),
        out.display()
    );
    Ok(())
}

fn cmd_train_sft(flags: &TrainFlags) -> Result<()> {
    let file = FileConfig::load(flags.config.as_deref())?;
    let stage = flags.resolve(&file, TrainConfig::sft())?;
    let data: Vec<Sample> = load_jsonl(&stage.data)?;
    let out = train_sft(&stage.train, &file.model(), &data)?;
    println!("final_loss {:.6}", out.log.final_loss().unwrap_or(f64::NAN));
    report_saved(stage.train.checkpoint_path.as_deref().unwrap_or(Path::new("")));
    Ok(())
}

fn cmd_train_rm(flags: &TrainFlags, init: &Path, holdout: Option<f64>) -> Result<()> {
    let file = FileConfig::load(flags.config.as_deref())?;
    let stage = flags.resolve(&file, TrainConfig::rm())?;
    let (lm, meta) = load_lm(init)?;
    if meta.stage != "sft" {
        log::warn!(
            "reward model initialized from a {:?} checkpoint, expected sft",
            meta.stage
        );
    }
    let pairs: Vec<PreferencePair> = load_jsonl(&stage.data)?;
    let fraction = holdout.or(file.holdout_fraction).unwrap_or(0.1);
    let (train, heldout) = split_holdout(&pairs, fraction, stage.train.seed)?;
    let out = train_rm(&stage.train, &train, &heldout, &lm)?;
    if let Some(acc) = out.manifest.metrics.get("heldout_accuracy") {
        println!("heldout_accuracy {acc} ({} pairs)", heldout.len());
    }
    report_saved(stage.train.checkpoint_path.as_deref().unwrap_or(Path::new("")));
    Ok(())
}

/// Reads demonstrations or preference pairs; the schema is taken from the
/// first record. Pairs expand to their chosen then rejected sample.
fn read_samples(path: &Path) -> Result<Vec<Sample>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("{}");
    let probe: serde_json::Value =
        serde_json::from_str(first).with_context(|| format!("{}:1: invalid JSON", path.display()))?;
    if probe.get("chosen").is_some() {
        let pairs: Vec<PreferencePair> = parse_jsonl(&text, path)?;
        Ok(pairs
            .iter()
            .flat_map(|p| [p.chosen_sample(), p.rejected_sample()])
            .collect())
    } else {
        Ok(parse_jsonl(&text, path)?)
    }
}

fn cmd_label(rm: &Path, inputs: &[PathBuf], out: &Path) -> Result<()> {
    let (rm, _) = Checkpoint::load(rm)?
        .into_rm()
        .with_context(|| format!("{} is not a reward-model checkpoint", rm.display()))?;
    let mut samples = Vec::new();
    for p in inputs {
        samples.extend(read_samples(p)?);
    }
    let labeled = label_dataset(&rm, &samples)?;
    let stats = save_labeled(out, &labeled)?;
    println!(
        "labeled {} samples: raw mean {:.6}, std {:.6}",
        labeled.samples.len(),
        labeled.stats.mean,
        labeled.stats.std
    );
    println!("stats {}", stats.display());
    Ok(())
}

fn cmd_align(method: Option<AlignMethod>, flags: &TrainFlags, init: &Path, t: Option<f64>) -> Result<()> {
    let file = FileConfig::load(flags.config.as_deref())?;
    let acfg = align_config(method, t, &file)?;
    let stage = flags.resolve(&file, TrainConfig::align())?;
    let (lm, meta) = load_lm(init)?;
    if meta.stage != "sft" {
        log::warn!("aligning a {:?} checkpoint, expected sft", meta.stage);
    }
    let (data, stats) = load_labeled(&stage.data)?;
    let out = align_finetune(&stage.train, &acfg, &data, &stats, &lm)?;
    println!(
        "{}: {} steps, {} skipped, final_loss {:.6}",
        acfg.method,
        out.log.steps,
        out.log.skipped,
        out.log.final_loss().unwrap_or(f64::NAN)
    );
    report_saved(stage.train.checkpoint_path.as_deref().unwrap_or(Path::new("")));
    Ok(())
}

fn cmd_generate(ckpt: &Path, prompt: &str, score: Option<f64>, max_new: usize) -> Result<()> {
    let (params, meta) = load_lm(ckpt)?;
    let text = match (meta.score_conditioned, score) {
        (true, s) => ca_generate(&params, prompt, s.unwrap_or(5.0), max_new)?,
        (false, Some(_)) => {
            log::warn!(
                "--score ignored: {} was never trained with <rm_score> conditioning",
                ckpt.display()
            );
            chat_generate(&params, prompt, max_new)?
        }
        (false, None) => chat_generate(&params, prompt, max_new)?,
    };
    println!("{text}");
    Ok(())
}

fn cmd_evaluate(ckpts: &[(String, PathBuf)], prompts: &Path, out: &Path, score: f64, max_new: usize) -> Result<()> {
    let models = ckpts
        .iter()
        .map(|(name, path)| {
            let ck = Checkpoint::load(path)?;
            EvalModel::from_checkpoint(name, ck, score).with_context(|| format!("loading model {name}"))
        })
        .collect::<Result<Vec<_>>>()?;
    let prompts: Vec<EvalPrompt> = load_jsonl(prompts)?;
    let report = oracle_eval(&models, &prompts, max_new)?;
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    fs::write(out, json).with_context(|| format!("writing {}", out.display()))?;
    print!("{}", report.summary());
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NamedResponse {
    name: String,
    response: String,
}

fn cmd_judge_prompt(question: &str, responses: &Path) -> Result<()> {
    let text = fs::read_to_string(responses).with_context(|| format!("reading {}", responses.display()))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let r: NamedResponse =
            serde_json::from_str(line).with_context(|| format!("{}:{}", responses.display(), i + 1))?;
        rows.push((r.name, r.response));
    }
    print!("{}", render_judge_prompt(question, &rows)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { out, n, seed, n_eval } => synth(&out, n, seed, n_eval),
        Command::TrainSft(flags) => cmd_train_sft(&flags),
        Command::TrainRm {
            flags,
            init,
            holdout_fraction,
        } => cmd_train_rm(&flags, &init, holdout_fraction),
        Command::Label { rm, inputs, out } => cmd_label(&rm, &inputs, &out),
        Command::Align { method, flags, init, t } => cmd_align(method, &flags, &init, t),
        Command::Generate {
            ckpt,
            prompt,
            score,
            max_new_tokens,
        } => cmd_generate(&ckpt, &prompt, score, max_new_tokens),
        Command::Evaluate {
            ckpts,
            prompts,
            out,
            score,
            max_new_tokens,
        } => cmd_evaluate(&ckpts, &prompts, &out, score, max_new_tokens),
        Command::JudgePrompt { question, responses } => cmd_judge_prompt(&question, &responses),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
