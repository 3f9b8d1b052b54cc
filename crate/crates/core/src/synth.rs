//! Synthetic worlds with a known ground-truth model.
//!
//! A [`SyntheticWorld`] is realizable: labels come from a model of the same
//! family being trained, so estimation error can be measured directly. A
//! [`PlantedWorld`] is a hard pair set where base similarity carries no signal
//! but a known diagonal projection separates the labels.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::{LabeledPair, PairDataset};
use crate::error::{Error, Result};
use crate::metrics::{mean_abs_error, roc_auc};
use crate::model::{CalibrationParams, ParamBounds, ProjectionHead, SimilarityModel};
use crate::store::EmbeddingStore;
use crate::train::{train, TrainConfig};
use crate::vector::{cosine_similarity, Embedding, Prompt};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelMode {
    /// The label is the ground-truth probability itself.
    Exact,
    /// The label is a 0/1 draw with the ground-truth probability.
    Bernoulli,
}

impl LabelMode {
    pub fn draw<R: Rng + ?Sized>(self, p: f64, rng: &mut R) -> f64 {
        match self {
            LabelMode::Exact => p,
            LabelMode::Bernoulli => {
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Uniform point on the unit sphere.
pub fn unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Embedding> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let e = Embedding::new(v)?;
        if e.norm() > 1e-6 {
            return e.scaled(1.0 / e.norm());
        }
    }
}

/// Row-major orthogonal matrix from Gram–Schmidt on a Gaussian matrix.
fn random_rotation<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while rows.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        for r in &rows {
            let proj: f64 = v.iter().zip(r).map(|(a, b)| a * b).sum();
            for (x, y) in v.iter_mut().zip(r) {
                *x -= proj * y;
            }
        }
        let n = libm::sqrt(v.iter().map(|x| x * x).sum());
        if n > 1e-8 {
            rows.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    rows.concat()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWorld {
    pub truth: SimilarityModel,
    pub bounds: ParamBounds,
    pub mode: LabelMode,
}

/// Ground-truth settings for [`SyntheticWorld::generate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldConfig {
    pub lambda: f64,
    pub c: f64,
    /// Diagonal emphasis runs geometrically from `emphasis` down to `1/emphasis`.
    pub emphasis: f64,
    pub bounds: ParamBounds,
    /// Random pairs drawn for the spread check.
    pub spread_samples: usize,
    pub max_attempts: usize,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            lambda: 0.05,
            c: 2.0,
            emphasis: 2.0,
            bounds: ParamBounds {
                lambda_min: 0.01,
                c_max: 10.0,
            },
            spread_samples: 2000,
            max_attempts: 16,
        }
    }
}

impl SyntheticWorld {
    pub fn new(truth: SimilarityModel, bounds: ParamBounds, mode: LabelMode) -> Result<Self> {
        bounds.check(&truth.calibration())?;
        Ok(Self { truth, bounds, mode })
    }

    /// Ground truth `W⋆ = D·R` with `R` a random rotation and `D` diagonal.
    ///
    /// The world is redrawn until ground-truth probabilities on random pairs
    /// reach below 0.05 and above 0.95.
    pub fn generate(dim: usize, seed: u64, mode: LabelMode, cfg: WorldConfig) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidArgument(format!("world dimension must be at least 2, got {dim}")));
        }
        let calib = CalibrationParams::new(cfg.lambda, cfg.c)?;
        cfg.bounds.check(&calib)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..cfg.max_attempts {
            let rot = random_rotation(dim, &mut rng);
            let mut w = vec![0.0; dim * dim];
            for i in 0..dim {
                let t = if dim == 1 { 0.0 } else { i as f64 / (dim - 1) as f64 };
                let scale = libm::pow(cfg.emphasis, 1.0 - 2.0 * t);
                for j in 0..dim {
                    w[i * dim + j] = scale * rot[i * dim + j];
                }
            }
            let world = Self::new(
                SimilarityModel::new(ProjectionHead::from_weights(dim, w)?, calib),
                cfg.bounds,
                mode,
            )?;
            let (lo, hi) = world.probability_range(cfg.spread_samples, &mut rng)?;
            if lo < 0.05 && hi > 0.95 {
                return Ok(world);
            }
        }
        Err(Error::ConstructionFailed(format!(
            "no world with probability spread found in {} attempts",
            cfg.max_attempts
        )))
    }

    pub fn dim(&self) -> usize {
        self.truth.dim()
    }

    fn probability_range(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<(f64, f64)> {
        let (mut lo, mut hi) = (1.0f64, 0.0f64);
        for _ in 0..n {
            let a = unit_vector(self.dim(), rng)?;
            let b = unit_vector(self.dim(), rng)?;
            let p = self.truth.predict_prob(&a, &b)?;
            lo = lo.min(p);
            hi = hi.max(p);
        }
        Ok((lo, hi))
    }

    /// `n` held-out embedding pairs.
    pub fn sample_pairs(&self, n: usize, seed: u64) -> Result<Vec<(Embedding, Embedding)>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Ok((unit_vector(self.dim(), &mut rng)?, unit_vector(self.dim(), &mut rng)?)))
            .collect()
    }
}

/// Pairs together with the embeddings they refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub store: EmbeddingStore,
    pub dataset: PairDataset,
}

/// `n` independent pairs with labels drawn per the world's label mode.
///
/// Prompt ids carry the seed, so samples drawn with different seeds can
/// share one store.
pub fn sample_dataset(world: &SyntheticWorld, n: usize, seed: u64) -> Result<Sample> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = EmbeddingStore::new();
    let mut prompts = Vec::with_capacity(2 * n);
    let mut pairs = Vec::with_capacity(n);
    for i in 0..n {
        let a = unit_vector(world.dim(), &mut rng)?;
        let b = unit_vector(world.dim(), &mut rng)?;
        let p = world.truth.predict_prob(&a, &b)?;
        let label = world.mode.draw(p, &mut rng);
        let (ia, ib) = (format!("s{seed}-{i}a"), format!("s{seed}-{i}b"));
        store.insert(ia.clone(), a)?;
        store.insert(ib.clone(), b)?;
        prompts.push(Prompt::new(ia.clone(), ia.clone())?);
        prompts.push(Prompt::new(ib.clone(), ib.clone())?);
        pairs.push(LabeledPair::new(ia, ib, label));
    }
    Ok(Sample {
        store,
        dataset: PairDataset::new(pairs, prompts)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub mean_abs_error: f64,
}

/// Seeds and sizes for [`convergence_experiment`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentSeeds {
    /// Seed of the training sample; each size draws its own sample from
    /// `data + index`.
    pub data: u64,
    pub eval: u64,
    pub eval_pairs: usize,
}

impl Default for ExperimentSeeds {
    fn default() -> Self {
        Self {
            data: 1,
            eval: 2,
            eval_pairs: 10_000,
        }
    }
}

/// Trains a fresh jointly calibrated model per sample size and measures its
/// mean absolute probability error on held-out pairs.
pub fn convergence_experiment(
    world: &SyntheticWorld,
    n_list: &[usize],
    template: &TrainConfig,
    seeds: ExperimentSeeds,
) -> Result<Vec<ConvergenceRow>> {
    if n_list.is_empty() {
        return Err(Error::Empty("sample size list"));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(format!(
            "sample sizes must be strictly increasing: {n_list:?}"
        )));
    }
    let held_out = world.sample_pairs(seeds.eval_pairs, seeds.eval)?;
    let refs: Vec<(&Embedding, &Embedding)> = held_out.iter().map(|(a, b)| (a, b)).collect();
    let cfg = TrainConfig {
        joint: true,
        bounds: Some(world.bounds),
        ..*template
    };

    let mut rows = Vec::with_capacity(n_list.len());
    for (i, &n) in n_list.iter().enumerate() {
        let sample = sample_dataset(world, n, seeds.data.wrapping_add(i as u64))?;
        let report = train(&sample.store, &sample.dataset, &PairDataset::default(), &cfg)?;
        rows.push(ConvergenceRow {
            n,
            mean_abs_error: mean_abs_error(&report.model, &world.truth, &refs)?,
        });
    }
    Ok(rows)
}

/// Shape of a planted hard world.
///
/// Dimensions split into a shared block (first half), a relevant block and
/// a nuisance block (a quarter each). Each pair is `u ± h` with `u` in the
/// shared block; `h` lies in the relevant block for label 0 and in the
/// nuisance block for label 1, with `|h|²/|u|²` drawn from
/// `ratio · [1 − jitter, 1 + jitter]`. Both labels therefore share one base
/// similarity distribution, while weighting the relevant block by `kappa` and
/// the nuisance block by `1/kappa` pulls them apart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantConfig {
    pub ratio: f64,
    pub jitter: f64,
    pub kappa: f64,
    pub max_attempts: usize,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            // Base cosine (1 − t)/(1 + t) ≈ 0.89.
            ratio: 0.058,
            jitter: 0.1,
            kappa: 2.0,
            max_attempts: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedWorld {
    pub prompts: Vec<Prompt>,
    pub store: EmbeddingStore,
    pub dataset: PairDataset,
    pub plant: ProjectionHead,
    pub base_auc: f64,
    pub planted_auc: f64,
}

/// Builds `n_prompts / 2` balanced pairs; see [`PlantConfig`].
///
/// Generation retries until base AUC lies in `[0.45, 0.55]` and the planted
/// projection reaches AUC ≥ 0.99.
pub fn plant_hard_world(dim: usize, n_prompts: usize, seed: u64, cfg: PlantConfig) -> Result<PlantedWorld> {
    if dim < 4 {
        return Err(Error::InvalidArgument(format!("planted worlds need d >= 4, got {dim}")));
    }
    if n_prompts < 4 {
        return Err(Error::InvalidArgument(format!("need at least 4 prompts, got {n_prompts}")));
    }
    if !(cfg.ratio > 0.0 && cfg.jitter >= 0.0 && cfg.jitter < 1.0 && cfg.kappa > 0.0) {
        return Err(Error::InvalidArgument(format!("invalid plant configuration {cfg:?}")));
    }
    let shared = dim / 2;
    let relevant = dim / 4;
    let blocks = [(0, shared), (shared, shared + relevant), (shared + relevant, dim)];

    let mut diag = vec![0.0; dim * dim];
    for i in 0..dim {
        diag[i * dim + i] = if i < blocks[1].0 {
            1.0
        } else if i < blocks[2].0 {
            cfg.kappa
        } else {
            1.0 / cfg.kappa
        };
    }
    let plant = ProjectionHead::from_weights(dim, diag)?;
    let planted_model = SimilarityModel::new(plant.clone(), CalibrationParams::new(1.0, 0.0)?);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_pairs = n_prompts / 2;
    for _ in 0..cfg.max_attempts {
        let mut store = EmbeddingStore::new();
        let mut prompts = Vec::with_capacity(2 * n_pairs);
        let mut pairs = Vec::with_capacity(n_pairs);
        let (mut base, mut planted, mut labels) = (Vec::new(), Vec::new(), Vec::new());
        for i in 0..n_pairs {
            let positive = i % 2 == 1;
            let (lo, hi) = if positive { blocks[2] } else { blocks[1] };
            let u = block_vector(dim, blocks[0], &mut rng);
            let t = cfg.ratio * rng.random_range(1.0 - cfg.jitter..=1.0 + cfg.jitter);
            let h: Vec<f64> = block_vector(dim, (lo, hi), &mut rng).iter().map(|x| x * libm::sqrt(t)).collect();
            let a = Embedding::new(u.iter().zip(&h).map(|(x, y)| x + y).collect())?;
            let b = Embedding::new(u.iter().zip(&h).map(|(x, y)| x - y).collect())?;
            let (a, b) = (a.scaled(1.0 / a.norm())?, b.scaled(1.0 / b.norm())?);

            base.push(cosine_similarity(&a, &b)?);
            planted.push(planted_model.similarity(&a, &b)?);
            labels.push(positive);

            let (ia, ib) = (format!("plant{seed}-{i}a"), format!("plant{seed}-{i}b"));
            store.insert(ia.clone(), a)?;
            store.insert(ib.clone(), b)?;
            prompts.push(Prompt::new(ia.clone(), ia.clone())?);
            prompts.push(Prompt::new(ib.clone(), ib.clone())?);
            pairs.push(LabeledPair::new(ia, ib, if positive { 1.0 } else { 0.0 }));
        }
        let base_auc = roc_auc(&base, &labels)?.auc;
        let planted_auc = roc_auc(&planted, &labels)?.auc;
        if (0.45..=0.55).contains(&base_auc) && planted_auc >= 0.99 {
            let dataset = PairDataset::new(pairs, prompts.clone())?;
            return Ok(PlantedWorld {
                prompts,
                store,
                dataset,
                plant,
                base_auc,
                planted_auc,
            });
        }
    }
    Err(Error::ConstructionFailed(format!(
        "planted world missed its AUC targets in {} attempts",
        cfg.max_attempts
    )))
}

/// Unit vector supported on coordinates `lo..hi`.
fn block_vector<R: Rng + ?Sized>(dim: usize, (lo, hi): (usize, usize), rng: &mut R) -> Vec<f64> {
    loop {
        let mut v = vec![0.0; dim];
        for x in &mut v[lo..hi] {
            *x = rng.sample(StandardNormal);
        }
        let n = libm::sqrt(v.iter().map(|x| x * x).sum());
        if n > 1e-6 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}
