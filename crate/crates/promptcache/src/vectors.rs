//! Binary vector files: base embeddings (`PCEMB1`) and index snapshots (`PCIDX1`).
//!
//! Both share one layout: a magic line, a text header `d=<int> n=<int>`, then
//! per record a little-endian `u32` id length, the UTF-8 id bytes and `d`
//! little-endian `f32` values.

use std::collections::BTreeSet;
use std::path::Path;

use promptcache_core::{Embedding, EmbeddingStore, VectorIndex};

use crate::error::{read, write, Error, Result};

pub const EMBEDDINGS_MAGIC: &[u8] = b"PCEMB1\n";
pub const INDEX_MAGIC: &[u8] = b"PCIDX1\n";

/// Records in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFile {
    pub dim: usize,
    pub records: Vec<(String, Vec<f32>)>,
}

impl VectorFile {
    /// Rounds every embedding in the store to `f32`, in id order.
    pub fn from_store(store: &EmbeddingStore) -> Self {
        Self::from_entries(store.dim().unwrap_or(0), store.iter())
    }

    /// Rounds every indexed vector to `f32`, in insertion order.
    pub fn from_index(index: &VectorIndex) -> Self {
        Self::from_entries(index.dim().unwrap_or(0), index.iter())
    }

    fn from_entries<'a>(dim: usize, entries: impl Iterator<Item = (&'a str, &'a Embedding)>) -> Self {
        let records = entries
            .map(|(id, e)| (id.to_owned(), e.as_slice().iter().map(|&x| x as f32).collect()))
            .collect();
        Self { dim, records }
    }

    pub fn encode(&self, magic: &[u8]) -> Vec<u8> {
        let mut out = magic.to_vec();
        out.extend(format!("d={} n={}\n", self.dim, self.records.len()).bytes());
        for (id, values) in &self.records {
            out.extend((id.len() as u32).to_le_bytes());
            out.extend(id.as_bytes());
            for v in values {
                out.extend(v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(path: &Path, magic: &[u8], bytes: &[u8]) -> Result<Self> {
        let fail = |m: String| Error::format(path, m);
        let rest = bytes.strip_prefix(magic).ok_or_else(|| {
            fail(format!(
                "bad magic, expected {:?}",
                String::from_utf8_lossy(magic.strip_suffix(b"\n").unwrap_or(magic))
            ))
        })?;
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| fail("header line is not terminated".into()))?;
        let header = std::str::from_utf8(&rest[..end]).map_err(|_| fail("header is not UTF-8".into()))?;
        let (dim, n) = parse_header(header).ok_or_else(|| fail(format!("malformed header {header:?}")))?;
        if dim == 0 && n > 0 {
            return Err(fail("dimension must be positive".into()));
        }

        let mut cur = Cursor { buf: &rest[end + 1..] };
        let mut seen = BTreeSet::new();
        let mut records = Vec::with_capacity(n.min(1 << 20));
        for i in 0..n {
            let truncated = || fail(format!("truncated at record {i}"));
            let len = u32::from_le_bytes(cur.take(4).ok_or_else(truncated)?.try_into().unwrap()) as usize;
            let id = std::str::from_utf8(cur.take(len).ok_or_else(truncated)?)
                .map_err(|_| fail(format!("record {i}: id is not UTF-8")))?
                .to_owned();
            let raw = cur.take(dim * 4).ok_or_else(truncated)?;
            let values: Vec<f32> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            if values.iter().any(|v| !v.is_finite()) {
                return Err(fail(format!("record {i} ({id:?}) has a non-finite value")));
            }
            if !seen.insert(id.clone()) {
                return Err(fail(format!("duplicate id {id:?}")));
            }
            records.push((id, values));
        }
        if !cur.buf.is_empty() {
            return Err(fail(format!("{} trailing bytes after {n} records", cur.buf.len())));
        }
        Ok(Self { dim, records })
    }
}

fn parse_header(header: &str) -> Option<(usize, usize)> {
    let mut parts = header.split(' ');
    let d = parts.next()?.strip_prefix("d=")?.parse().ok()?;
    let n = parts.next()?.strip_prefix("n=")?.parse().ok()?;
    parts.next().is_none().then_some((d, n))
}

struct Cursor<'a> {
    buf: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        if self.buf.len() < n {
            return None;
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Some(head)
    }
}

fn to_embedding(path: &Path, id: &str, values: &[f32]) -> Result<Embedding> {
    Embedding::from_f32(values).map_err(|e| Error::format(path, format!("vector {id:?}: {e}")))
}

pub fn read_embedding_file(path: &Path) -> Result<VectorFile> {
    VectorFile::decode(path, EMBEDDINGS_MAGIC, &read(path)?)
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingStore> {
    let file = read_embedding_file(path)?;
    let mut store = EmbeddingStore::new();
    for (id, values) in &file.records {
        store.insert(id.clone(), to_embedding(path, id, values)?)?;
    }
    Ok(store)
}

pub fn write_embeddings(path: &Path, file: &VectorFile) -> Result<()> {
    write(path, file.encode(EMBEDDINGS_MAGIC))
}

pub fn save_index(path: &Path, index: &VectorIndex) -> Result<()> {
    write(path, VectorFile::from_index(index).encode(INDEX_MAGIC))
}

/// Rebuilds the index in snapshot order; norms are recomputed in `f64`.
pub fn load_index(path: &Path) -> Result<VectorIndex> {
    let file = VectorFile::decode(path, INDEX_MAGIC, &read(path)?)?;
    let mut index = if file.dim == 0 {
        VectorIndex::new()
    } else {
        VectorIndex::with_dim(file.dim)
    };
    for (id, values) in &file.records {
        index.insert(id.clone(), to_embedding(path, id, values)?)?;
    }
    Ok(index)
}
