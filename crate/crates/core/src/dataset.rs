//! Labelled prompt pairs: mining, hard-dataset selection and splitting.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::index::VectorIndex;
use crate::store::EmbeddingStore;
use crate::vector::{cosine_similarity, Prompt};

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPair {
    pub q1: String,
    pub q2: String,
    pub label: f64,
    /// Base-embedding cosine similarity, when known.
    pub similarity: Option<f64>,
}

impl LabeledPair {
    pub fn new(q1: impl Into<String>, q2: impl Into<String>, label: f64) -> Self {
        Self {
            q1: q1.into(),
            q2: q2.into(),
            label,
            similarity: None,
        }
    }

    /// Unordered key for duplicate detection.
    pub fn key(&self) -> (String, String) {
        unordered(&self.q1, &self.q2)
    }
}

fn unordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.into(), b.into())
    } else {
        (b.into(), a.into())
    }
}

/// Pairs plus the prompt table they refer to.
///
/// Every pair id resolves in the table, no pair joins a prompt to itself,
/// labels lie in `[0, 1]`, and no unordered pair appears twice.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairDataset {
    pairs: Vec<LabeledPair>,
    prompts: BTreeMap<String, Prompt>,
}

impl PairDataset {
    pub fn new(pairs: Vec<LabeledPair>, prompts: impl IntoIterator<Item = Prompt>) -> Result<Self> {
        let mut table = BTreeMap::new();
        for p in prompts {
            if table.contains_key(&p.id) {
                return Err(Error::DuplicateId(p.id));
            }
            table.insert(p.id.clone(), p);
        }
        let mut seen = BTreeSet::new();
        for pair in &pairs {
            for id in [&pair.q1, &pair.q2] {
                if !table.contains_key(id) {
                    return Err(Error::UnknownPrompt(id.clone()));
                }
            }
            if pair.q1 == pair.q2 {
                return Err(Error::SelfPair(pair.q1.clone()));
            }
            if !(0.0..=1.0).contains(&pair.label) {
                return Err(Error::LabelOutOfRange { label: pair.label });
            }
            if let Some(s) = pair.similarity {
                if !s.is_finite() {
                    return Err(Error::NonFinite("cached similarity"));
                }
            }
            if !seen.insert(pair.key()) {
                return Err(Error::DuplicatePair(pair.q1.clone(), pair.q2.clone()));
            }
        }
        Ok(Self {
            pairs,
            prompts: table,
        })
    }

    pub fn pairs(&self) -> &[LabeledPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn prompt(&self, id: &str) -> Option<&Prompt> {
        self.prompts.get(id)
    }

    /// Prompt table in id order.
    pub fn prompts(&self) -> impl Iterator<Item = &Prompt> {
        self.prompts.values()
    }

    /// The selected pairs (in the given order) with only the prompts they reference.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut pairs = Vec::with_capacity(indices.len());
        let mut ids = BTreeSet::new();
        for &i in indices {
            let pair = self
                .pairs
                .get(i)
                .ok_or_else(|| Error::InvalidArgument(format!("pair index {i} out of range")))?;
            ids.insert(pair.q1.as_str());
            ids.insert(pair.q2.as_str());
            pairs.push(pair.clone());
        }
        let prompts: Vec<Prompt> = ids.into_iter().map(|id| self.prompts[id].clone()).collect();
        Self::new(pairs, prompts)
    }

    /// Checks every referenced prompt has an embedding.
    pub fn check_embeddings(&self, store: &EmbeddingStore) -> Result<()> {
        for pair in &self.pairs {
            store.get(&pair.q1)?;
            store.get(&pair.q2)?;
        }
        Ok(())
    }
}

/// Drops prompts whose text repeats an earlier prompt's text.
pub fn dedupe_prompts(prompts: Vec<Prompt>) -> Vec<Prompt> {
    let mut texts = BTreeSet::new();
    prompts
        .into_iter()
        .filter(|p| texts.insert(p.text.clone()))
        .collect()
}

/// For each prompt, pairs with its `k` nearest neighbours by exact cosine
/// search, with unordered duplicates and self-pairs removed.
///
/// Output order follows the prompt order, then neighbour rank.
pub fn mine_pairs(prompts: &[Prompt], store: &EmbeddingStore, k: usize) -> Result<Vec<(String, String)>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if k >= prompts.len() {
        return Err(Error::NotEnoughNeighbours {
            k,
            available: prompts.len().saturating_sub(1),
        });
    }
    let mut index = VectorIndex::new();
    for p in prompts {
        index.insert(p.id.clone(), store.get(&p.id)?.clone())?;
    }

    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for p in prompts {
        let query = store.get(&p.id)?;
        let neighbours = index.nearest(query, k + 1)?;
        for n in neighbours.into_iter().filter(|n| n.id != p.id).take(k) {
            if seen.insert(unordered(&p.id, &n.id)) {
                out.push((p.id.clone(), n.id));
            }
        }
    }
    Ok(out)
}

/// Positions kept by the alternating-label sweep over labels already in
/// ascending-similarity order. The sweep starts as if the previous label
/// were 1 and keeps an item whenever its label differs from the last kept.
pub fn alternating_selection(labels: &[bool]) -> Vec<usize> {
    let mut last = true;
    let mut kept = Vec::new();
    for (i, &label) in labels.iter().enumerate() {
        if label != last {
            kept.push(i);
            last = label;
        }
    }
    kept
}

fn binary_label(label: f64) -> Result<bool> {
    if label == 0.0 {
        Ok(false)
    } else if label == 1.0 {
        Ok(true)
    } else {
        Err(Error::NonBinaryLabel { label })
    }
}

/// Selects a subset on which the base similarity barely ranks labels.
///
/// Pairs are sorted by base cosine similarity ascending (ties by `q1`, then
/// `q2`) and the alternating sweep keeps a subsequence whose labels run
/// 0, 1, 0, 1, .... Kept pairs carry their similarity.
pub fn build_hard_dataset(dataset: &PairDataset, store: &EmbeddingStore) -> Result<PairDataset> {
    let mut scored = Vec::with_capacity(dataset.len());
    for pair in dataset.pairs() {
        let label = binary_label(pair.label)?;
        let sim = cosine_similarity(store.get(&pair.q1)?, store.get(&pair.q2)?)?;
        scored.push((sim, pair, label));
    }
    scored.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then_with(|| a.1.q1.cmp(&b.1.q1))
            .then_with(|| a.1.q2.cmp(&b.1.q2))
    });

    let labels: Vec<bool> = scored.iter().map(|s| s.2).collect();
    let pairs = alternating_selection(&labels)
        .into_iter()
        .map(|i| {
            let (sim, pair, _) = scored[i];
            LabeledPair {
                similarity: Some(sim),
                ..pair.clone()
            }
        })
        .collect();
    PairDataset::new(pairs, dataset.prompts().cloned())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.7,
            val: 0.1,
            test: 0.2,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let all = [self.train, self.val, self.test];
        if all.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::InvalidArgument(format!("split ratios must be positive: {all:?}")));
        }
        if (all.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("split ratios must sum to 1: {all:?}")));
        }
        Ok(())
    }
}

/// `(⌊train·n⌋, ⌊val·n⌋, remainder)`.
pub fn split_sizes(n: usize, ratios: SplitRatios) -> Result<(usize, usize, usize)> {
    ratios.validate()?;
    // The small nudge keeps exact products such as 0.7 × 10 from flooring to 6.
    let floor = |r: f64| libm::floor(r * n as f64 + 1e-9) as usize;
    let train = floor(ratios.train).min(n);
    let val = floor(ratios.val).min(n - train);
    Ok((train, val, n - train - val))
}

/// Seeded shuffle, then contiguous train/val/test slices.
pub fn split(
    dataset: &PairDataset,
    ratios: SplitRatios,
    seed: u64,
) -> Result<(PairDataset, PairDataset, PairDataset)> {
    if dataset.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 pairs to split, got {}",
            dataset.len()
        )));
    }
    let (n_train, n_val, _) = split_sizes(dataset.len(), ratios)?;
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, rest) = order.split_at(n_train);
    let (val, test) = rest.split_at(n_val);
    Ok((dataset.subset(train)?, dataset.subset(val)?, dataset.subset(test)?))
}
