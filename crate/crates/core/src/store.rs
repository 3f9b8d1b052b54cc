use alloc::collections::BTreeMap;
use alloc::string::String;

use crate::error::{Error, Result};
use crate::vector::Embedding;

/// Base embeddings keyed by prompt id, all of one dimension.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingStore {
    dim: Option<usize>,
    map: BTreeMap<String, Embedding>,
}

impl EmbeddingStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn insert(&mut self, id: impl Into<String>, e: Embedding) -> Result<()> {
        let id = id.into();
        if let Some(d) = self.dim {
            if d != e.dim() {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: e.dim(),
                });
            }
        }
        if self.map.contains_key(&id) {
            return Err(Error::DuplicateId(id));
        }
        self.dim = Some(e.dim());
        self.map.insert(id, e);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Result<&Embedding> {
        self.map
            .get(id)
            .ok_or_else(|| Error::MissingEmbedding(id.into()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.map.contains_key(id)
    }

    /// Entries in id order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Embedding)> {
        self.map.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Adds every entry of `other`; ids must not collide.
    pub fn extend_from(&mut self, other: &EmbeddingStore) -> Result<()> {
        for (id, e) in other.iter() {
            self.insert(id, e.clone())?;
        }
        Ok(())
    }
}
