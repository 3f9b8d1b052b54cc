//! Streaming prompt cache with unlimited capacity.
//!
//! Each incoming prompt is matched against its nearest cached prompt. A
//! similarity above the threshold is a hit and the cached response is served;
//! otherwise the prompt is a miss and joins the cache. Hits are judged against
//! a ground-truth set of interchangeable prompt pairs.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::PairDataset;
use crate::error::{Error, Result};
use crate::index::{Neighbour, VectorIndex};
use crate::model::SimilarityModel;
use crate::store::EmbeddingStore;
use crate::vector::Embedding;

#[derive(Debug, Clone, PartialEq)]
pub struct CacheEntry {
    pub id: String,
    pub embedding: Embedding,
    pub response: String,
}

#[derive(Debug, Clone)]
pub struct SimCache {
    index: VectorIndex,
    entries: BTreeMap<String, CacheEntry>,
    tau: f64,
}

impl SimCache {
    pub fn new(tau: f64) -> Result<Self> {
        check_tau(tau)?;
        Ok(Self {
            index: VectorIndex::new(),
            entries: BTreeMap::new(),
            tau,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, id: &str) -> Option<&CacheEntry> {
        self.entries.get(id)
    }

    /// Nearest cached entry, whether or not it clears the threshold.
    pub fn nearest(&self, e: &Embedding) -> Result<Option<Neighbour>> {
        if self.is_empty() {
            return Ok(None);
        }
        Ok(self.index.nearest(e, 1)?.pop())
    }

    /// The cached entry that would serve `e`, if any.
    pub fn lookup(&self, e: &Embedding) -> Result<Option<(&CacheEntry, f64)>> {
        Ok(match self.nearest(e)? {
            Some(n) if n.similarity > self.tau => Some((&self.entries[&n.id], n.similarity)),
            _ => None,
        })
    }

    pub fn insert(&mut self, entry: CacheEntry) -> Result<()> {
        self.index.insert(entry.id.clone(), entry.embedding.clone())?;
        self.entries.insert(entry.id.clone(), entry);
        Ok(())
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidArgument(format!("threshold must lie in [0, 1], got {tau}")));
    }
    Ok(())
}

/// Decides whether a hit served a good response.
///
/// [`HitOracle`] answers from known label-1 pairs; an external judge can
/// implement this to grade hits some other way.
pub trait HitJudge {
    /// `prompt` was served the response cached for `cached`.
    fn is_good_hit(&self, prompt: &str, cached: &str) -> bool;
}

/// Unordered prompt pairs that may share one response.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HitOracle {
    pairs: BTreeSet<(String, String)>,
}

impl HitOracle {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every label-1 pair of the dataset.
    pub fn from_dataset(dataset: &PairDataset) -> Self {
        let mut oracle = Self::new();
        for p in dataset.pairs().iter().filter(|p| p.label == 1.0) {
            oracle.pairs.insert(p.key());
        }
        oracle
    }

    pub fn insert(&mut self, a: &str, b: &str) -> Result<()> {
        if a == b {
            return Err(Error::SelfPair(a.into()));
        }
        self.pairs.insert(key(a, b));
        Ok(())
    }

    pub fn contains(&self, a: &str, b: &str) -> bool {
        self.pairs.contains(&key(a, b))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.pairs.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }
}

impl HitJudge for HitOracle {
    fn is_good_hit(&self, prompt: &str, cached: &str) -> bool {
        self.contains(prompt, cached)
    }
}

fn key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.into(), b.into())
    } else {
        (b.into(), a.into())
    }
}

/// How prompts are compared: raw base embeddings or through a trained head.
#[derive(Debug, Clone, Copy)]
pub enum Scorer<'a> {
    Raw,
    Model(&'a SimilarityModel),
}

impl Scorer<'_> {
    /// Cosine similarity between two keys equals the scorer's similarity
    /// between the underlying prompts.
    fn key(&self, e: &Embedding) -> Result<Embedding> {
        match self {
            Scorer::Raw => Ok(e.clone()),
            Scorer::Model(m) => m.project(e),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Hit,
    Miss,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimEvent {
    pub prompt: String,
    pub decision: Decision,
    /// Nearest cached prompt, absent when the cache was empty.
    pub matched: Option<String>,
    pub similarity: Option<f64>,
    /// Oracle verdict on a hit.
    pub correct: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub tau: f64,
    pub n_correct_hit: u64,
    pub n_false_hit: u64,
    pub n_miss: u64,
    pub n_expected_hit: u64,
    pub efficiency: f64,
    pub events: Vec<SimEvent>,
}

/// `(n_correct − n_false) / n_expected`.
pub fn efficiency(n_correct_hit: u64, n_false_hit: u64, n_expected_hit: u64) -> Result<f64> {
    if n_expected_hit == 0 {
        return Err(Error::InvalidArgument("expected hit count must be at least 1".into()));
    }
    Ok((n_correct_hit as f64 - n_false_hit as f64) / n_expected_hit as f64)
}

/// Runs the stream through a fresh cache at threshold `tau`.
pub fn simulate(
    stream: &[String],
    store: &EmbeddingStore,
    scorer: Scorer<'_>,
    tau: f64,
    oracle: &dyn HitJudge,
    n_expected_hit: u64,
) -> Result<SimReport> {
    let keys = stream_keys(stream, store, scorer)?;
    run(stream, &keys, tau, oracle, n_expected_hit)
}

fn stream_keys(stream: &[String], store: &EmbeddingStore, scorer: Scorer<'_>) -> Result<Vec<Embedding>> {
    let mut seen = BTreeSet::new();
    stream
        .iter()
        .map(|id| {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId(id.clone()));
            }
            scorer.key(store.get(id)?)
        })
        .collect()
}

fn run(
    stream: &[String],
    keys: &[Embedding],
    tau: f64,
    oracle: &dyn HitJudge,
    n_expected_hit: u64,
) -> Result<SimReport> {
    check_tau(tau)?;
    efficiency(0, 0, n_expected_hit)?;
    let mut cache = SimCache::new(tau)?;
    let (mut n_correct_hit, mut n_false_hit, mut n_miss) = (0u64, 0u64, 0u64);
    let mut events = Vec::with_capacity(stream.len());

    for (id, e) in stream.iter().zip(keys) {
        let nearest = cache.nearest(e)?;
        let event = match nearest {
            Some(n) if n.similarity > tau => {
                let correct = oracle.is_good_hit(id, &n.id);
                if correct {
                    n_correct_hit += 1;
                } else {
                    n_false_hit += 1;
                }
                SimEvent {
                    prompt: id.clone(),
                    decision: Decision::Hit,
                    matched: Some(n.id),
                    similarity: Some(n.similarity),
                    correct: Some(correct),
                }
            }
            other => {
                n_miss += 1;
                cache.insert(CacheEntry {
                    id: id.clone(),
                    embedding: e.clone(),
                    response: format!("response:{id}"),
                })?;
                SimEvent {
                    prompt: id.clone(),
                    decision: Decision::Miss,
                    similarity: other.as_ref().map(|n| n.similarity),
                    matched: other.map(|n| n.id),
                    correct: None,
                }
            }
        };
        events.push(event);
    }

    Ok(SimReport {
        tau,
        n_correct_hit,
        n_false_hit,
        n_miss,
        n_expected_hit,
        efficiency: efficiency(n_correct_hit, n_false_hit, n_expected_hit)?,
        events,
    })
}

/// A shuffled prompt stream built from sampled pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    pub prompts: Vec<String>,
    pub oracle: HitOracle,
    pub n_expected_hit: u64,
}

/// Samples `n_pos` label-1 and `n_neg` label-0 pairs that share no prompt,
/// then shuffles their prompts into one stream.
///
/// The oracle holds exactly the sampled label-1 pairs. The expected hit
/// count is `n_pos`, or 1 when no positives are requested.
pub fn build_stream(test: &PairDataset, n_pos: usize, n_neg: usize, seed: u64) -> Result<Stream> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut used = BTreeSet::new();
    let mut prompts = Vec::with_capacity(2 * (n_pos + n_neg));
    let mut oracle = HitOracle::new();

    for (label, needed) in [(1.0, n_pos), (0.0, n_neg)] {
        let mut candidates: Vec<_> = test.pairs().iter().filter(|p| p.label == label).collect();
        candidates.shuffle(&mut rng);
        let mut taken = 0;
        for p in candidates {
            if taken == needed {
                break;
            }
            if used.contains(p.q1.as_str()) || used.contains(p.q2.as_str()) {
                continue;
            }
            used.insert(p.q1.as_str());
            used.insert(p.q2.as_str());
            prompts.push(p.q1.clone());
            prompts.push(p.q2.clone());
            if label == 1.0 {
                oracle.insert(&p.q1, &p.q2)?;
            }
            taken += 1;
        }
        if taken < needed {
            return Err(Error::InsufficientPairs {
                label: label as u8,
                needed,
                available: taken,
            });
        }
    }
    prompts.shuffle(&mut rng);
    Ok(Stream {
        prompts,
        oracle,
        n_expected_hit: n_pos.max(1) as u64,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub tau: f64,
    pub efficiency: f64,
    pub n_correct_hit: u64,
    pub n_false_hit: u64,
    pub n_miss: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    /// Row with the highest efficiency; the first such row on ties.
    pub best: usize,
}

/// One fresh simulation per threshold.
pub fn sweep_thresholds(
    stream: &[String],
    store: &EmbeddingStore,
    scorer: Scorer<'_>,
    taus: &[f64],
    oracle: &dyn HitJudge,
    n_expected_hit: u64,
) -> Result<Sweep> {
    if taus.is_empty() {
        return Err(Error::Empty("threshold list"));
    }
    let keys = stream_keys(stream, store, scorer)?;
    let mut rows = Vec::with_capacity(taus.len());
    for &tau in taus {
        let r = run(stream, &keys, tau, oracle, n_expected_hit)?;
        rows.push(SweepRow {
            tau,
            efficiency: r.efficiency,
            n_correct_hit: r.n_correct_hit,
            n_false_hit: r.n_false_hit,
            n_miss: r.n_miss,
        });
    }
    let mut best = 0;
    for (i, row) in rows.iter().enumerate() {
        if row.efficiency > rows[best].efficiency {
            best = i;
        }
    }
    Ok(Sweep { rows, best })
}
