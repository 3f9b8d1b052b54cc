//! Exact cosine nearest-neighbour search by full scan.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::vector::{dot, Embedding};

#[derive(Debug, Clone, PartialEq)]
pub struct Neighbour {
    pub id: String,
    pub similarity: f64,
}

/// Growing collection of embeddings keyed by unique ids.
///
/// Queries rank by cosine similarity, highest first; equal similarities keep
/// insertion order.
#[derive(Debug, Clone, Default)]
pub struct VectorIndex {
    dim: Option<usize>,
    ids: Vec<String>,
    vectors: Vec<Embedding>,
    positions: BTreeMap<String, usize>,
}

impl VectorIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_dim(dim: usize) -> Self {
        Self {
            dim: Some(dim),
            ..Self::default()
        }
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.positions.contains_key(id)
    }

    pub fn get(&self, id: &str) -> Option<&Embedding> {
        self.positions.get(id).map(|&i| &self.vectors[i])
    }

    /// Entries in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Embedding)> {
        self.ids.iter().map(String::as_str).zip(&self.vectors)
    }

    pub fn insert(&mut self, id: impl Into<String>, embedding: Embedding) -> Result<()> {
        let id = id.into();
        match self.dim {
            Some(d) if d != embedding.dim() => {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: embedding.dim(),
                })
            }
            _ => {}
        }
        if self.positions.contains_key(&id) {
            return Err(Error::DuplicateId(id));
        }
        self.dim = Some(embedding.dim());
        self.positions.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        self.vectors.push(embedding);
        Ok(())
    }

    /// The `k` entries most similar to `query`.
    pub fn nearest(&self, query: &Embedding, k: usize) -> Result<Vec<Neighbour>> {
        if self.is_empty() {
            return Err(Error::EmptyIndex);
        }
        if k == 0 || k > self.len() {
            return Err(Error::NotEnoughNeighbours {
                k,
                available: self.len(),
            });
        }
        let dim = self.dim.unwrap_or(query.dim());
        if query.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: query.dim(),
            });
        }

        let q = query.as_slice();
        let qn = query.norm();
        let mut scored: Vec<(f64, usize)> = self
            .vectors
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let s = (dot(q, v.as_slice()) / (qn * v.norm())).clamp(-1.0, 1.0);
                (s, i)
            })
            .collect();

        let rank = |a: &(f64, usize), b: &(f64, usize)| {
            b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1))
        };
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, rank);
            scored.truncate(k);
        }
        scored.sort_by(rank);

        Ok(scored
            .into_iter()
            .map(|(similarity, i)| Neighbour {
                id: self.ids[i].clone(),
                similarity,
            })
            .collect())
    }
}
