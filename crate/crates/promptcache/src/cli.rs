//! The `promptcache` command line.
//!
//! Every command writes `config.json` (the fully resolved arguments) and
//! `result.json` into its output directory, plus command-specific artifacts.
//! `promptcache rerun <dir>/config.json` replays a recorded run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use promptcache_core::dataset::{build_hard_dataset, dedupe_prompts, mine_pairs, split, SplitRatios};
use promptcache_core::simcache::{build_stream, simulate, sweep_thresholds, Decision, Scorer, Stream};
use promptcache_core::synth::{
    convergence_experiment, plant_hard_world, ExperimentSeeds, LabelMode, PlantConfig, SyntheticWorld, WorldConfig,
};
use promptcache_core::train::{evaluate_roc, train, TrainConfig};
use promptcache_core::{
    cosine_similarity, roc_auc, EmbeddingStore, LabeledPair, LossType, PairDataset, ParamBounds, SimilarityModel,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::checkpoint;
use crate::error::{read, write, Error, Result};
use crate::jsonl::{self, CandidateRecord};
use crate::report::{roc_csv, sweep_csv, synth_csv, to_json};
use crate::vectors::{read_embeddings, write_embeddings, VectorFile};

#[derive(Debug, Parser)]
#[command(name = "promptcache", version, about = "Embedding-similarity prompt caching toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", content = "args", rename_all = "kebab-case")]
pub enum Command {
    /// Pair every prompt with its nearest neighbours.
    Mine(MineArgs),
    /// Keep an alternating-label subsequence ordered by base similarity.
    BuildHard(BuildHardArgs),
    /// Seeded train/validation/test split.
    Split(SplitArgs),
    /// Fine-tune a projection head on labelled pairs.
    Train(TrainArgs),
    /// ROC and AUC of a checkpoint on labelled pairs.
    Eval(EvalArgs),
    /// Stream sampled test pairs through a cache at one threshold.
    Simulate(SimulateArgs),
    /// Simulate over a list of thresholds.
    Sweep(SweepArgs),
    /// Estimation error versus sample size on a synthetic world.
    Synth(SynthArgs),
    /// Write a planted hard dataset with its embeddings.
    Plant(PlantArgs),
    /// Replay a recorded config.json.
    #[serde(skip)]
    Rerun(RerunArgs),
}

impl Command {
    fn out_mut(&mut self) -> Option<&mut PathBuf> {
        match self {
            Command::Mine(a) => Some(&mut a.out),
            Command::BuildHard(a) => Some(&mut a.out),
            Command::Split(a) => Some(&mut a.out),
            Command::Train(a) => Some(&mut a.out),
            Command::Eval(a) => Some(&mut a.out),
            Command::Simulate(a) => Some(&mut a.out),
            Command::Sweep(a) => Some(&mut a.out),
            Command::Synth(a) => Some(&mut a.out),
            Command::Plant(a) => Some(&mut a.out),
            Command::Rerun(_) => None,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MineArgs {
    /// Prompt table (JSON lines with `id`, `text`).
    #[arg(long)]
    pub prompts: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Keep a seeded random subset of this many prompts before mining.
    #[arg(long)]
    pub sample: Option<usize>,
    /// Labelled pairs to attach; unlabelled mined pairs are then dropped.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, env = "PROMPTCACHE_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BuildHardArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SplitArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    /// Train, validation and test fractions.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.7, 0.1, 0.2])]
    pub ratios: Vec<f64>,
    #[arg(long, env = "PROMPTCACHE_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "out-dir", alias = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub val: PathBuf,
    /// Also report AUC on this split.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: PathBuf,
    /// `bce` or `sld`.
    #[arg(long, default_value = "bce")]
    pub loss: String,
    #[arg(long, default_value_t = 0.01)]
    pub lambda: f64,
    /// Defaults to 88 for bce and 90 for sld.
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long, default_value_t = 1e-5)]
    pub lr: f64,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
    #[arg(long, env = "PROMPTCACHE_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Optimise lambda and c together with the head.
    #[arg(long)]
    pub joint: bool,
    #[arg(long, default_value_t = 0.01)]
    pub weight_decay: f64,
    #[arg(long, requires = "c_max")]
    pub lambda_min: Option<f64>,
    #[arg(long, requires = "lambda_min")]
    pub c_max: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Where to write the ROC table; defaults to `<out>/roc.csv`.
    #[arg(long)]
    pub roc_out: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct StreamArgs {
    /// Score with a trained model.
    #[arg(long, required_unless_present = "raw", conflicts_with = "raw")]
    pub checkpoint: Option<PathBuf>,
    /// Score with raw base embeddings.
    #[arg(long)]
    pub raw: bool,
    #[arg(long)]
    pub test_pairs: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long, default_value_t = 250)]
    pub n_pos: usize,
    #[arg(long, default_value_t = 250)]
    pub n_neg: usize,
    #[arg(long, env = "PROMPTCACHE_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub stream: StreamArgs,
    #[arg(long, default_value_t = 0.9)]
    pub tau: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub stream: StreamArgs,
    #[arg(long, value_delimiter = ',', default_values_t = [0.88, 0.89, 0.90, 0.91, 0.92, 0.93, 0.94])]
    pub tau_list: Vec<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 16)]
    pub d: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [250, 1000, 4000])]
    pub n_list: Vec<usize>,
    #[arg(long, default_value = "bce")]
    pub loss: String,
    /// `exact` or `bernoulli`; defaults to bernoulli for bce and exact for sld.
    #[arg(long)]
    pub labels: Option<String>,
    #[arg(long, env = "PROMPTCACHE_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 80)]
    pub epochs: usize,
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
    #[arg(long, default_value_t = 10_000)]
    pub eval_pairs: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PlantArgs {
    #[arg(long, default_value_t = 8)]
    pub d: usize,
    #[arg(long, default_value_t = 20_000)]
    pub n_prompts: usize,
    #[arg(long, env = "PROMPTCACHE_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RerunArgs {
    /// A config.json written by an earlier run.
    pub config: PathBuf,
    /// Write to this directory instead of the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `std::env::args`, runs, and maps failures to exit codes.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(command: Command) -> Result<()> {
    let mut command = match command {
        Command::Rerun(r) => {
            let path = &r.config;
            let mut recorded: Command = serde_json::from_slice(&read(path)?)
                .map_err(|e| Error::format(path, format!("not a recorded config: {e}")))?;
            if let (Some(out), Some(slot)) = (r.out, recorded.out_mut()) {
                *slot = out;
            }
            recorded
        }
        other => other,
    };
    resolve(&mut command)?;
    let out = command.out_mut().expect("resolved command has an output directory").clone();
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    write(&out.join("config.json"), to_json(&command))?;

    match &command {
        Command::Mine(a) => cmd_mine(a),
        Command::BuildHard(a) => cmd_build_hard(a),
        Command::Split(a) => cmd_split(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Plant(a) => cmd_plant(a),
        Command::Rerun(_) => Err(Error::Usage("a recorded config cannot itself be a rerun".into())),
    }
}

/// Fills defaults that depend on other flags and rejects bad combinations
/// before any file is touched.
fn resolve(command: &mut Command) -> Result<()> {
    let usage = |m: String| Err(Error::Usage(m));
    match command {
        Command::Mine(a) if a.k == 0 => return usage("--k must be positive".into()),
        Command::Split(a) => {
            ratios(&a.ratios)?.validate().map_err(|e| Error::Usage(e.to_string()))?;
        }
        Command::Train(a) => {
            let loss: LossType = a.loss.parse()?;
            a.loss = loss.to_string();
            a.c.get_or_insert(TrainConfig::defaults(loss).c);
            train_config(a)?.validate().map_err(|e| Error::Usage(e.to_string()))?;
        }
        Command::Simulate(a) => {
            if !(0.0..=1.0).contains(&a.tau) {
                return usage(format!("--tau must lie in [0, 1], got {}", a.tau));
            }
        }
        Command::Sweep(a) => {
            if a.tau_list.is_empty() {
                return usage("--tau-list is empty".into());
            }
            if let Some(t) = a.tau_list.iter().find(|t| !(0.0..=1.0).contains(*t)) {
                return usage(format!("threshold {t} outside [0, 1]"));
            }
        }
        Command::Synth(a) => {
            let loss: LossType = a.loss.parse()?;
            a.loss = loss.to_string();
            let labels = a.labels.get_or_insert_with(|| match loss {
                LossType::Bce => "bernoulli".into(),
                LossType::Sld => "exact".into(),
            });
            label_mode(labels)?;
            if a.n_list.is_empty() || a.n_list.windows(2).any(|w| w[0] >= w[1]) {
                return usage(format!("--n-list must be strictly increasing, got {:?}", a.n_list));
            }
            if a.eval_pairs == 0 || a.epochs == 0 || a.batch == 0 || !(a.lr.is_finite() && a.lr > 0.0) {
                return usage("--eval-pairs, --epochs, --batch and --lr must be positive".into());
            }
        }
        Command::Plant(a) if a.d < 4 => return usage(format!("--d must be at least 4, got {}", a.d)),
        _ => {}
    }
    Ok(())
}

fn ratios(v: &[f64]) -> Result<SplitRatios> {
    match v {
        [train, val, test] => Ok(SplitRatios {
            train: *train,
            val: *val,
            test: *test,
        }),
        _ => Err(Error::Usage(format!("--ratios needs three values, got {}", v.len()))),
    }
}

fn label_mode(s: &str) -> Result<LabelMode> {
    match s {
        "exact" => Ok(LabelMode::Exact),
        "bernoulli" => Ok(LabelMode::Bernoulli),
        other => Err(Error::Usage(format!("--labels must be exact or bernoulli, got {other:?}"))),
    }
}

fn train_config(a: &TrainArgs) -> Result<TrainConfig> {
    let loss: LossType = a.loss.parse()?;
    let bounds = match (a.lambda_min, a.c_max) {
        (Some(l), Some(c)) => Some(ParamBounds::new(l, c).map_err(|e| Error::Usage(e.to_string()))?),
        _ => None,
    };
    Ok(TrainConfig {
        loss,
        learning_rate: a.lr,
        epochs: a.epochs,
        batch_size: a.batch,
        lambda: a.lambda,
        c: a.c.unwrap_or(TrainConfig::defaults(loss).c),
        joint: a.joint,
        seed: a.seed,
        weight_decay: a.weight_decay,
        bounds,
        ..TrainConfig::defaults(loss)
    })
}

fn write_result(out: &Path, value: &serde_json::Value) -> Result<()> {
    write(&out.join("result.json"), to_json(value))
}

fn cmd_mine(a: &MineArgs) -> Result<()> {
    let all = jsonl::read_prompts(&a.prompts)?;
    let n_prompts = all.len();
    let mut prompts = dedupe_prompts(all);
    let n_unique = prompts.len();
    if let Some(n) = a.sample {
        let mut order: Vec<usize> = (0..prompts.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(a.seed));
        let mut keep: Vec<usize> = order.into_iter().take(n).collect();
        keep.sort_unstable();
        prompts = keep.into_iter().map(|i| prompts[i].clone()).collect();
    }
    let store = read_embeddings(&a.embeddings)?;
    let mined = mine_pairs(&prompts, &store, a.k)?;
    let text: BTreeMap<&str, &str> = prompts.iter().map(|p| (p.id.as_str(), p.text.as_str())).collect();
    let sim = |x: &str, y: &str| -> Result<f64> { Ok(cosine_similarity(store.get(x)?, store.get(y)?)?) };

    let n_labeled = if let Some(path) = &a.labels {
        let labelled = jsonl::read_pairs(path)?;
        let labels: BTreeMap<(String, String), f64> =
            labelled.pairs().iter().map(|p| (p.key(), p.label)).collect();
        let mut pairs = Vec::new();
        for (x, y) in &mined {
            let key = if x <= y { (x.clone(), y.clone()) } else { (y.clone(), x.clone()) };
            if let Some(&label) = labels.get(&key) {
                pairs.push(LabeledPair {
                    similarity: Some(sim(x, y)?),
                    ..LabeledPair::new(x.clone(), y.clone(), label)
                });
            }
        }
        let n = pairs.len();
        let dataset = PairDataset::new(pairs, prompts.iter().cloned())?;
        jsonl::write_pairs(&a.out.join("pairs.jsonl"), &dataset)?;
        Some(n)
    } else {
        let mut records = Vec::with_capacity(mined.len());
        for (x, y) in &mined {
            let (t1, t2) = (text[x.as_str()], text[y.as_str()]);
            records.push(CandidateRecord {
                q1: t1.to_owned(),
                q2: t2.to_owned(),
                sim: sim(x, y)?,
                id1: (x != t1).then(|| x.clone()),
                id2: (y != t2).then(|| y.clone()),
            });
        }
        write(&a.out.join("pairs.jsonl"), jsonl::encode_candidates(&records))?;
        None
    };

    println!(
        "mined {} pairs from {} prompts ({} unique, k={})",
        mined.len(),
        prompts.len(),
        n_unique,
        a.k
    );
    if let Some(n) = n_labeled {
        println!("{n} mined pairs carry labels");
    }
    write_result(
        &a.out,
        &json!({
            "n_prompts": n_prompts,
            "n_unique_prompts": n_unique,
            "n_mined_prompts": prompts.len(),
            "k": a.k,
            "n_pairs": mined.len(),
            "n_labeled": n_labeled,
        }),
    )
}

fn label_counts(d: &PairDataset) -> (usize, usize) {
    let pos = d.pairs().iter().filter(|p| p.label >= 0.5).count();
    (pos, d.len() - pos)
}

fn cmd_build_hard(a: &BuildHardArgs) -> Result<()> {
    let dataset = jsonl::read_pairs(&a.pairs)?;
    let store = read_embeddings(&a.embeddings)?;
    let hard = build_hard_dataset(&dataset, &store)?;
    jsonl::write_pairs(&a.out.join("pairs.jsonl"), &hard)?;
    let scores: Vec<f64> = hard.pairs().iter().map(|p| p.similarity.unwrap_or(0.0)).collect();
    let labels: Vec<bool> = hard.pairs().iter().map(|p| p.label == 1.0).collect();
    let base_auc = roc_auc(&scores, &labels).ok().map(|r| r.auc);
    let (pos, neg) = label_counts(&hard);
    println!("kept {} of {} pairs ({pos} positive, {neg} negative)", hard.len(), dataset.len());
    if let Some(auc) = base_auc {
        println!("base-similarity AUC on the hard set: {auc:.4}");
    }
    write_result(
        &a.out,
        &json!({
            "n_input": dataset.len(),
            "n_output": hard.len(),
            "n_positive": pos,
            "n_negative": neg,
            "base_auc": base_auc,
        }),
    )
}

fn cmd_split(a: &SplitArgs) -> Result<()> {
    let dataset = jsonl::read_pairs(&a.pairs)?;
    let (train, val, test) = split(&dataset, ratios(&a.ratios)?, a.seed)?;
    for (name, part) in [("train", &train), ("val", &val), ("test", &test)] {
        jsonl::write_pairs(&a.out.join(format!("{name}.jsonl")), part)?;
    }
    println!("split {} pairs into {}/{}/{}", dataset.len(), train.len(), val.len(), test.len());
    write_result(
        &a.out,
        &json!({
            "n_pairs": dataset.len(),
            "train": train.len(),
            "val": val.len(),
            "test": test.len(),
            "seed": a.seed,
        }),
    )
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let cfg = train_config(a)?;
    let store = read_embeddings(&a.embeddings)?;
    let train_set = jsonl::read_pairs(&a.train)?;
    let val = jsonl::read_pairs(&a.val)?;
    let test = a.test.as_deref().map(jsonl::read_pairs).transpose()?;
    if let Some(t) = &test {
        t.check_embeddings(&store)?;
    }

    let report = train(&store, &train_set, &val, &cfg)?;
    checkpoint::save(&a.out.join("model.ckpt"), &report.model)?;
    let test_auc = match &test {
        Some(t) => Some(evaluate_roc(&report.model, &store, t)?.auc),
        None => None,
    };
    let best_epoch = report
        .val_auc
        .iter()
        .enumerate()
        .filter_map(|(i, a)| a.map(|a| (i + 1, a)))
        .fold(None, |best: Option<(usize, f64)>, (e, a)| match best {
            Some((_, b)) if b >= a => best,
            _ => Some((e, a)),
        });

    let fmt = |a: Option<f64>| a.map_or("n/a".to_owned(), |a| format!("{a:.4}"));
    println!("validation AUC before training: {}", fmt(report.initial_val_auc));
    for (i, (loss, auc)) in report.train_loss.iter().zip(&report.val_auc).enumerate() {
        println!("epoch {:>3}  loss {loss:.6}  val AUC {}", i + 1, fmt(*auc));
    }
    if let Some(t) = test_auc {
        println!("test AUC: {t:.4}");
    }
    let calib = report.model.calibration();
    write_result(
        &a.out,
        &json!({
            "config": {
                "loss": cfg.loss.as_str(),
                "learning_rate": cfg.learning_rate,
                "epochs": cfg.epochs,
                "batch_size": cfg.batch_size,
                "lambda": cfg.lambda,
                "c": cfg.c,
                "joint": cfg.joint,
                "weight_decay": cfg.weight_decay,
                "lambda_min": cfg.bounds.map(|b| b.lambda_min),
                "c_max": cfg.bounds.map(|b| b.c_max),
            },
            "seed": cfg.seed,
            "n_train": train_set.len(),
            "n_val": val.len(),
            "steps": report.steps,
            "train_loss": report.train_loss,
            "initial_val_auc": report.initial_val_auc,
            "val_auc": report.val_auc,
            "best_epoch": best_epoch.map(|b| b.0),
            "test_auc": test_auc,
            "lambda": calib.lambda(),
            "c": calib.c(),
            "checkpoint": "model.ckpt",
        }),
    )
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let model = checkpoint::load(&a.checkpoint)?;
    let store = read_embeddings(&a.embeddings)?;
    let dataset = jsonl::read_pairs(&a.pairs)?;
    let roc = evaluate_roc(&model, &store, &dataset)?;
    let roc_path = a.roc_out.clone().unwrap_or_else(|| a.out.join("roc.csv"));
    write(&roc_path, roc_csv(&roc))?;
    let (pos, neg) = label_counts(&dataset);
    println!("AUC {:.4} on {} pairs ({pos} positive, {neg} negative)", roc.auc, dataset.len());
    write_result(
        &a.out,
        &json!({
            "auc": roc.auc,
            "n_pairs": dataset.len(),
            "n_positive": pos,
            "n_negative": neg,
            "roc": roc_path,
        }),
    )
}

struct StreamSetup {
    store: EmbeddingStore,
    model: Option<SimilarityModel>,
    stream: Stream,
}

impl StreamSetup {
    fn load(a: &StreamArgs) -> Result<Self> {
        let model = a.checkpoint.as_deref().map(checkpoint::load).transpose()?;
        let store = read_embeddings(&a.embeddings)?;
        let test = jsonl::read_pairs(&a.test_pairs)?;
        let stream = build_stream(&test, a.n_pos, a.n_neg, a.seed)?;
        Ok(Self { store, model, stream })
    }

    fn scorer(&self) -> Scorer<'_> {
        self.model.as_ref().map_or(Scorer::Raw, Scorer::Model)
    }
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let s = StreamSetup::load(&a.stream)?;
    let st = &s.stream;
    let r = simulate(&st.prompts, &s.store, s.scorer(), a.tau, &st.oracle, st.n_expected_hit)?;
    println!(
        "tau {}: {} correct hits, {} false hits, {} misses, efficiency {:.4}",
        a.tau, r.n_correct_hit, r.n_false_hit, r.n_miss, r.efficiency
    );
    let events: Vec<_> = r
        .events
        .iter()
        .map(|e| {
            json!({
                "prompt": e.prompt,
                "decision": match e.decision { Decision::Hit => "hit", Decision::Miss => "miss" },
                "matched": e.matched,
                "similarity": e.similarity,
                "correct": e.correct,
            })
        })
        .collect();
    write_result(
        &a.out,
        &json!({
            "scorer": if a.stream.raw { "raw" } else { "checkpoint" },
            "tau": r.tau,
            "stream_length": st.prompts.len(),
            "nCorrectHit": r.n_correct_hit,
            "nFalseHit": r.n_false_hit,
            "nMiss": r.n_miss,
            "nExpectedHit": r.n_expected_hit,
            "efficiency": r.efficiency,
            "events": events,
        }),
    )
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let s = StreamSetup::load(&a.stream)?;
    let st = &s.stream;
    let sweep = sweep_thresholds(&st.prompts, &s.store, s.scorer(), &a.tau_list, &st.oracle, st.n_expected_hit)?;
    write(&a.out.join("sweep.csv"), sweep_csv(&sweep))?;
    for r in &sweep.rows {
        println!("tau {:<6} efficiency {:.4}", r.tau, r.efficiency);
    }
    let best = &sweep.rows[sweep.best];
    println!("best tau {} (efficiency {:.4})", best.tau, best.efficiency);
    let rows: Vec<_> = sweep
        .rows
        .iter()
        .map(|r| {
            json!({
                "tau": r.tau,
                "efficiency": r.efficiency,
                "nCorrectHit": r.n_correct_hit,
                "nFalseHit": r.n_false_hit,
                "nMiss": r.n_miss,
            })
        })
        .collect();
    write_result(
        &a.out,
        &json!({
            "scorer": if a.stream.raw { "raw" } else { "checkpoint" },
            "nExpectedHit": st.n_expected_hit,
            "rows": rows,
            "best_tau": best.tau,
            "best_efficiency": best.efficiency,
        }),
    )
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let loss: LossType = a.loss.parse()?;
    let mode = label_mode(a.labels.as_deref().unwrap_or("exact"))?;
    let world = SyntheticWorld::generate(a.d, a.seed, mode, WorldConfig::default())?;
    let template = TrainConfig {
        learning_rate: a.lr,
        epochs: a.epochs,
        batch_size: a.batch,
        lambda: 0.1,
        c: 0.0,
        weight_decay: 0.0,
        seed: a.seed,
        ..TrainConfig::defaults(loss)
    };
    let seeds = ExperimentSeeds {
        data: a.seed.wrapping_add(1),
        eval: a.seed.wrapping_add(2),
        eval_pairs: a.eval_pairs,
    };
    let rows = convergence_experiment(&world, &a.n_list, &template, seeds)?;
    write(&a.out.join("synth.csv"), synth_csv(&rows, loss, a.seed))?;
    for r in &rows {
        println!("N {:>6}  mean |P* - P| {:.4}", r.n, r.mean_abs_error);
    }
    let table: Vec<_> = rows
        .iter()
        .map(|r| json!({ "N": r.n, "mean_abs_error": r.mean_abs_error }))
        .collect();
    write_result(
        &a.out,
        &json!({
            "d": a.d,
            "loss": loss.as_str(),
            "labels": a.labels,
            "seed": a.seed,
            "eval_pairs": a.eval_pairs,
            "rows": table,
        }),
    )
}

fn cmd_plant(a: &PlantArgs) -> Result<()> {
    let world = plant_hard_world(a.d, a.n_prompts, a.seed, PlantConfig::default())?;
    write(&a.out.join("prompts.jsonl"), jsonl::encode_prompts(&world.prompts))?;
    write_embeddings(&a.out.join("embeddings.pcemb"), &VectorFile::from_store(&world.store))?;
    jsonl::write_pairs(&a.out.join("pairs.jsonl"), &world.dataset)?;
    let plant = SimilarityModel::new(world.plant.clone(), promptcache_core::CalibrationParams::new(1.0, 0.0)?);
    checkpoint::save(&a.out.join("plant.ckpt"), &plant)?;
    println!(
        "planted {} pairs in d={}: base AUC {:.4}, planted AUC {:.4}",
        world.dataset.len(),
        a.d,
        world.base_auc,
        world.planted_auc
    );
    write_result(
        &a.out,
        &json!({
            "d": a.d,
            "n_prompts": world.prompts.len(),
            "n_pairs": world.dataset.len(),
            "seed": a.seed,
            "base_auc": world.base_auc,
            "planted_auc": world.planted_auc,
        }),
    )
}
