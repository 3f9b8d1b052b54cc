//! Acceptance checks, one line per criterion.
//!
//! Runs without the libtest harness so the report reads top to bottom and a
//! failure in one criterion does not hide the others.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use promptcache_core::dataset::{build_hard_dataset, split};
use promptcache_core::loss::{bce_loss, loss, loss_and_grad, PairBatch, PairItem};
use promptcache_core::simcache::{efficiency, simulate, Decision, Scorer};
use promptcache_core::synth::{
    convergence_experiment, plant_hard_world, ExperimentSeeds, LabelMode, PlantConfig, SyntheticWorld, WorldConfig,
};
use promptcache_core::train::train;
use promptcache_core::{
    roc_auc, CalibrationParams, Embedding, EmbeddingStore, HitOracle, LabeledPair, LossType, PairDataset,
    ProjectionHead, Prompt, SimilarityModel, SplitRatios, TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn model(dim: usize, w: Vec<f64>, lambda: f64, c: f64) -> SimilarityModel {
    SimilarityModel::new(
        ProjectionHead::from_weights(dim, w).unwrap(),
        CalibrationParams::new(lambda, c).unwrap(),
    )
}

fn uniform_vector(dim: usize, rng: &mut ChaCha8Rng) -> Embedding {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        if v.iter().map(|x| x * x).sum::<f64>() > 0.05 {
            return Embedding::new(v).unwrap();
        }
    }
}

fn gradients() -> Outcome {
    const DIM: usize = 4;
    const H: f64 = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst, mut checked) = (0.0f64, 0usize);
    for config in 0..100 {
        let w: Vec<f64> = (0..DIM * DIM)
            .map(|i| rng.random_range(-0.5..0.5) + if i % (DIM + 1) == 0 { 1.0 } else { 0.0 })
            .collect();
        let lambda = rng.random_range(0.1..1.0);
        let c = rng.random_range(-2.0..2.0);
        let pairs: Vec<(Embedding, Embedding, f64)> = (0..8)
            .map(|_| {
                let y: f64 = rng.random_range(0.0..=1.0);
                (uniform_vector(DIM, &mut rng), uniform_vector(DIM, &mut rng), y.max(1e-10))
            })
            .collect();
        let batch = PairBatch::new(pairs.iter().map(|(a, b, y)| PairItem { e1: a, e2: b, label: *y }).collect()).unwrap();

        for kind in [LossType::Bce, LossType::Sld] {
            let at = |w: &[f64], l: f64, c: f64| loss(kind, &model(DIM, w.to_vec(), l, c), &batch).unwrap();
            let (_, g) = loss_and_grad(kind, &model(DIM, w.clone(), lambda, c), &batch).unwrap();
            let mut entries = Vec::with_capacity(DIM * DIM + 2);
            for i in 0..w.len() {
                let (mut up, mut down) = (w.clone(), w.clone());
                up[i] += H;
                down[i] -= H;
                entries.push((g.d_weights[i], (at(&up, lambda, c) - at(&down, lambda, c)) / (2.0 * H)));
            }
            entries.push((g.d_lambda, (at(&w, lambda + H, c) - at(&w, lambda - H, c)) / (2.0 * H)));
            entries.push((g.d_c, (at(&w, lambda, c + H) - at(&w, lambda, c - H)) / (2.0 * H)));

            for (i, (analytic, numeric)) in entries.into_iter().enumerate() {
                let scale = analytic.abs().max(numeric.abs());
                if scale <= 1e-8 {
                    continue;
                }
                let rel = (analytic - numeric).abs() / scale;
                worst = worst.max(rel);
                checked += 1;
                ensure(rel <= 1e-4, || format!("config {config} {kind} entry {i}: {analytic} vs {numeric}"))?;
            }
        }
    }
    Ok(format!("{checked} partials, max relative error {worst:.2e}"))
}

fn brute_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut total) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] && !labels[j] {
                total += 1.0;
                wins += if si > sj { 1.0 } else if si == sj { 0.5 } else { 0.0 };
            }
        }
    }
    wins / total
}

fn hard_dataset() -> Outcome {
    // Label runs in ascending similarity; each run leaves one survivor.
    let mut labels = Vec::new();
    for run in 0..200usize {
        labels.extend(std::iter::repeat(run % 2 == 1).take(1 + run % 4));
    }
    let mut store = EmbeddingStore::new();
    store.insert("anchor", Embedding::new(vec![1.0, 0.0]).unwrap()).unwrap();
    let mut prompts = vec![Prompt::new("anchor", "anchor").unwrap()];
    let mut pairs = Vec::new();
    let n = labels.len();
    for (i, &y) in labels.iter().enumerate() {
        let t = 3.0 - 2.9 * i as f64 / n as f64;
        let id = format!("q{i:04}");
        store.insert(id.clone(), Embedding::new(vec![t.cos(), t.sin()]).unwrap()).unwrap();
        prompts.push(Prompt::new(id.clone(), id.clone()).unwrap());
        pairs.push(LabeledPair::new("anchor", id, if y { 1.0 } else { 0.0 }));
    }
    let hard = build_hard_dataset(&PairDataset::new(pairs, prompts).unwrap(), &store).unwrap();
    ensure(hard.len() == 200, || format!("kept {} items", hard.len()))?;
    let sims: Vec<f64> = hard.pairs().iter().map(|p| p.similarity.unwrap()).collect();
    let ys: Vec<bool> = hard.pairs().iter().map(|p| p.label == 1.0).collect();
    ensure(sims.windows(2).all(|w| w[0] < w[1]), || "similarities not distinct".into())?;
    let auc = roc_auc(&sims, &ys).unwrap().auc;
    let oracle = brute_auc(&sims, &ys);
    ensure((auc - 0.505).abs() <= 1e-12 && (oracle - 0.505).abs() <= 1e-12, || {
        format!("auc {auc}, brute force {oracle}")
    })?;
    Ok(format!("{} → 200 kept, AUC {auc}", n))
}

fn auc_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for instance in 0..200 {
        let n = rng.random_range(2..=500);
        let levels = rng.random_range(2..50);
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..levels)) / 7.0).collect();
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        labels[0] = true;
        labels[1] = false;
        let auc = roc_auc(&scores, &labels).unwrap().auc;
        let diff = (auc - brute_auc(&scores, &labels)).abs();
        worst = worst.max(diff);
        ensure(diff <= 1e-12, || format!("instance {instance}: diff {diff:e}"))?;
    }
    Ok(format!("200 instances, max difference {worst:.1e}"))
}

fn convergence() -> Outcome {
    let run = |loss, mode| {
        let world = SyntheticWorld::generate(16, 1, mode, WorldConfig::default()).unwrap();
        let template = TrainConfig {
            learning_rate: 3e-3,
            epochs: 80,
            batch_size: 16,
            lambda: 0.1,
            c: 0.0,
            weight_decay: 0.0,
            ..TrainConfig::defaults(loss)
        };
        convergence_experiment(&world, &[250, 1000, 4000], &template, ExperimentSeeds::default())
            .unwrap()
            .into_iter()
            .map(|r| r.mean_abs_error)
            .collect::<Vec<f64>>()
    };
    let bce = run(LossType::Bce, LabelMode::Bernoulli);
    let sld = run(LossType::Sld, LabelMode::Exact);
    let trend = |e: &[f64]| e.windows(2).all(|w| w[1] <= 1.1 * w[0]);
    let detail = format!("bce {bce:.4?}, sld {sld:.4?}");
    ensure(trend(&bce) && bce[2] <= 0.05, || format!("bce fails: {detail}"))?;
    ensure(trend(&sld) && sld[2] <= 0.08, || format!("sld fails: {detail}"))?;
    Ok(detail)
}

fn auc_lift() -> Outcome {
    let world = plant_hard_world(8, 20_000, 0, PlantConfig::default()).map_err(|e| e.to_string())?;
    ensure((0.45..=0.55).contains(&world.base_auc), || format!("base AUC {}", world.base_auc))?;
    let (train_set, val, _) = split(&world.dataset, SplitRatios::default(), 0).unwrap();
    let mut detail = format!("base AUC {:.3}", world.base_auc);
    for kind in [LossType::Bce, LossType::Sld] {
        let r = train(&world.store, &train_set, &val, &TrainConfig::defaults(kind)).map_err(|e| e.to_string())?;
        let last = r.val_auc.last().copied().flatten().unwrap_or(0.0);
        let before = r.initial_val_auc.unwrap_or(f64::NAN);
        detail.push_str(&format!(", {kind} {before:.3} → {last:.3}"));
        ensure(r.val_auc.len() == 20 && last >= 0.95, || detail.clone())?;
    }
    Ok(detail)
}

fn simulator() -> Outcome {
    let mut store = EmbeddingStore::new();
    let s = (1.0f64 - 0.95 * 0.95).sqrt();
    store.insert("a", Embedding::new(vec![1.0, 0.0, 0.0]).unwrap()).unwrap();
    store.insert("b", Embedding::new(vec![0.0, 0.0, 1.0]).unwrap()).unwrap();
    store.insert("a'", Embedding::new(vec![0.95, s, 0.0]).unwrap()).unwrap();
    let mut oracle = HitOracle::new();
    oracle.insert("a", "a'").unwrap();
    let stream: Vec<String> = ["a", "b", "a'"].map(String::from).to_vec();
    let r = simulate(&stream, &store, Scorer::Raw, 0.9, &oracle, 1).unwrap();
    ensure(
        (r.n_correct_hit, r.n_false_hit, r.n_miss, r.efficiency) == (1, 0, 2, 1.0),
        || format!("hand trace gave {r:?}"),
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..50 {
        let n = rng.random_range(1..120);
        let mut store = EmbeddingStore::new();
        let ids: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
        for id in &ids {
            store.insert(id.clone(), uniform_vector(3, &mut rng)).unwrap();
        }
        let mut oracle = HitOracle::new();
        for _ in 0..n {
            let (x, y) = (rng.random_range(0..n), rng.random_range(0..n));
            if x != y {
                oracle.insert(&ids[x], &ids[y]).unwrap();
            }
        }
        let tau = rng.random_range(0.0..=1.0);
        let r = simulate(&ids, &store, Scorer::Raw, tau, &oracle, 1).unwrap();
        let hits = r.events.iter().filter(|e| e.decision == Decision::Hit).count() as u64;
        ensure(
            r.n_correct_hit + r.n_false_hit + r.n_miss == n as u64 && hits == r.n_correct_hit + r.n_false_hit,
            || format!("stream {case} leaks counts: {} {} {}", r.n_correct_hit, r.n_false_hit, r.n_miss),
        )?;
    }
    Ok("hand trace 1/0/2 at efficiency 1.0; 50 random streams conserve counts".into())
}

fn efficiency_arithmetic() -> Outcome {
    // Basis vector e_i for the first prompt of pair i; its partner leans
    // towards a shared axis, cosine ≈ 0.990 with e_i and ≈ 0.02 with other partners.
    const PAIRS: usize = 165;
    const FILLER: usize = 20;
    let dim = PAIRS + FILLER + 1;
    let common = dim - 1;
    let basis = |i: usize| {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        v
    };
    let mut store = EmbeddingStore::new();
    let mut oracle = HitOracle::new();
    let mut stream = Vec::new();
    for i in 0..PAIRS {
        let (a, b) = (format!("a{i}"), format!("b{i}"));
        let mut partner = basis(i);
        partner[i] = 0.99;
        partner[common] = 0.141;
        store.insert(a.clone(), Embedding::new(basis(i)).unwrap()).unwrap();
        store.insert(b.clone(), Embedding::new(partner).unwrap()).unwrap();
        if i < 150 {
            oracle.insert(&a, &b).unwrap();
        }
        stream.push(a);
        stream.push(b);
    }
    for j in 0..FILLER {
        let id = format!("f{j}");
        store.insert(id.clone(), Embedding::new(basis(PAIRS + j)).unwrap()).unwrap();
        stream.push(id);
    }
    let r = simulate(&stream, &store, Scorer::Raw, 0.9, &oracle, 250).unwrap();
    let direct = efficiency(150, 15, 250).unwrap();
    ensure(
        (r.n_correct_hit, r.n_false_hit, r.n_miss) == (150, 15, (PAIRS + FILLER) as u64),
        || format!("counters {} {} {}", r.n_correct_hit, r.n_false_hit, r.n_miss),
    )?;
    ensure((r.efficiency - 0.54).abs() < 1e-15 && r.efficiency == direct, || {
        format!("efficiency {} vs {direct}", r.efficiency)
    })?;
    ensure(efficiency(0, 0, 0).is_err(), || "zero expected hits accepted".into())?;
    Ok(format!("(150 − 15)/250 = {}", r.efficiency))
}

fn cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_promptcache"))
        .args(args)
        .env_remove("PROMPTCACHE_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr))
    })
}

fn determinism() -> Outcome {
    let tmp = TempDir::new().map_err(|e| e.to_string())?;
    let dir = |name: &str| tmp.path().join(name).to_str().unwrap().to_owned();
    let (plant, parts) = (dir("plant"), dir("split"));
    cli(&["plant", "--n-prompts", "1200", "--seed", "4", "--out", &plant])?;
    cli(&["split", "--pairs", &format!("{plant}/pairs.jsonl"), "--seed", "4", "--out-dir", &parts])?;
    let emb = format!("{plant}/embeddings.pcemb");

    let mut compared = Vec::new();
    for run in ["first", "second"] {
        let train_out = dir(&format!("train-{run}"));
        cli(&[
            "train",
            "--train", &format!("{parts}/train.jsonl"),
            "--val", &format!("{parts}/val.jsonl"),
            "--embeddings", &emb,
            "--epochs", "4",
            "--joint",
            "--seed", "9",
            "--out", &train_out,
        ])?;
        cli(&[
            "simulate",
            "--checkpoint", &format!("{train_out}/model.ckpt"),
            "--test-pairs", &format!("{plant}/pairs.jsonl"),
            "--embeddings", &emb,
            "--n-pos", "100",
            "--n-neg", "100",
            "--seed", "9",
            "--out", &dir(&format!("simulate-{run}")),
        ])?;
        cli(&[
            "synth",
            "--n-list", "100,300",
            "--epochs", "5",
            "--eval-pairs", "1000",
            "--seed", "9",
            "--out", &dir(&format!("synth-{run}")),
        ])?;
        compared.push(run);
    }
    for cmd in ["train", "simulate", "synth"] {
        let read = |run: &str| fs::read(Path::new(&dir(&format!("{cmd}-{run}"))).join("result.json")).unwrap();
        ensure(read(compared[0]) == read(compared[1]), || format!("{cmd} results differ"))?;
    }
    let ckpt = |run: &str| fs::read(Path::new(&dir(&format!("train-{run}"))).join("model.ckpt")).unwrap();
    ensure(ckpt("first") == ckpt("second"), || "checkpoints differ".into())?;
    Ok("train, simulate and synth results byte-identical".into())
}

fn unbiasedness() -> Outcome {
    const N: usize = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pairs: Vec<(Embedding, Embedding)> = (0..8).map(|_| (uniform_vector(4, &mut rng), uniform_vector(4, &mut rng))).collect();
    let truth = model(4, (0..16).map(|i| if i % 5 == 0 { 1.0 } else { 0.3 }).collect(), 0.4, 0.2);
    let fitted = SimilarityModel::identity(4, CalibrationParams::new(0.7, -0.1).unwrap()).unwrap();
    let p_star: Vec<f64> = pairs.iter().map(|(a, b)| truth.predict_prob(a, b).unwrap()).collect();

    // Cross-entropy of the fitted model against the true probabilities, pair by pair.
    let population: f64 = pairs
        .iter()
        .zip(&p_star)
        .map(|((a, b), &p)| {
            let q = fitted.predict_prob(a, b).unwrap();
            -(p * q.ln() + (1.0 - p) * (1.0 - q).ln())
        })
        .sum::<f64>()
        / 8.0;

    let mut expected = 0.0;
    let mut total_weight = 0.0;
    for draw in 0..8usize.pow(N as u32) {
        let idx: Vec<usize> = (0..N).map(|k| draw / 8usize.pow(k as u32) % 8).collect();
        for mask in 0..1usize << N {
            let ys: Vec<f64> = (0..N).map(|k| ((mask >> k) & 1) as f64).collect();
            let weight: f64 = idx
                .iter()
                .zip(&ys)
                .map(|(&i, &y)| if y == 1.0 { p_star[i] } else { 1.0 - p_star[i] } / 8.0)
                .product();
            let items = idx
                .iter()
                .zip(&ys)
                .map(|(&i, &y)| PairItem { e1: &pairs[i].0, e2: &pairs[i].1, label: y })
                .collect();
            expected += weight * bce_loss(&fitted, &PairBatch::new(items).unwrap()).unwrap();
            total_weight += weight;
        }
    }
    let diff = (expected - population).abs();
    ensure((total_weight - 1.0).abs() < 1e-12 && diff <= 1e-12, || {
        format!("expected {expected} vs population {population} (weight {total_weight})")
    })?;
    Ok(format!("E[empirical] = {expected:.15}, population {population:.15}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (1, "gradients match finite differences", gradients),
        (2, "hard-dataset AUC law", hard_dataset),
        (3, "trapezoid AUC equals Mann-Whitney", auc_equivalence),
        (4, "synthetic convergence", convergence),
        (5, "AUC lift on a planted hard world", auc_lift),
        (6, "simulator hand trace and conservation", simulator),
        (7, "efficiency arithmetic", efficiency_arithmetic),
        (8, "command determinism", determinism),
        (9, "empirical BCE is unbiased", unbiasedness),
    ];
    let mut failed = 0;
    for (n, name, check) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n}: PASS  {name} ({detail}) [{secs:.2}s]"),
            Err(why) => {
                failed += 1;
                println!("criterion {n}: FAIL  {name} ({why}) [{secs:.2}s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
