//! Vector and scalar primitives shared by the rest of the crate.
//!
//! All arithmetic is 64-bit. Transcendental functions come from `libm` so
//! results do not depend on the platform's math library.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A fixed-dimension, finite, nonzero embedding vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    values: Vec<f64>,
    norm: f64,
}

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyEmbedding);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding"));
        }
        let norm = l2_norm(&values);
        if norm == 0.0 {
            return Err(Error::ZeroNorm);
        }
        if !norm.is_finite() {
            return Err(Error::NonFinite("embedding norm"));
        }
        Ok(Self { values, norm })
    }

    pub fn from_f32(values: &[f32]) -> Result<Self> {
        Self::new(values.iter().map(|&v| f64::from(v)).collect())
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// Euclidean norm, computed once at construction.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// Multiplies every component by `factor`, which must be positive.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::InvalidArgument(alloc::format!(
                "scale factor must be positive and finite, got {factor}"
            )));
        }
        Self::new(self.values.iter().map(|v| v * factor).collect())
    }
}

/// A prompt with a stable identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Prompt {
    pub id: String,
    pub text: String,
}

impl Prompt {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self> {
        let (id, text) = (id.into(), text.into());
        if id.is_empty() {
            return Err(Error::InvalidArgument("prompt id must be non-empty".into()));
        }
        if text.is_empty() {
            return Err(Error::InvalidArgument(alloc::format!(
                "prompt {id:?} has empty text"
            )));
        }
        Ok(Self { id, text })
    }
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub(crate) fn l2_norm(x: &[f64]) -> f64 {
    libm::sqrt(dot(x, x))
}

/// Cosine similarity of two embeddings, clamped to `[-1, 1]`.
pub fn cosine_similarity(x: &Embedding, y: &Embedding) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    Ok(clamp_unit(dot(&x.values, &y.values) / (x.norm * y.norm)))
}

/// Cosine similarity of raw slices. Fails on mismatched lengths or a zero-norm side.
pub fn cosine_slices(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let (nx, ny) = (l2_norm(x), l2_norm(y));
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(clamp_unit(dot(x, y) / (nx * ny)))
}

fn clamp_unit(s: f64) -> f64 {
    s.clamp(-1.0, 1.0)
}

/// The logistic function `1 / (1 + exp(-x))`.
pub fn sigmoid(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFinite("sigmoid argument"));
    }
    Ok(logistic(x))
}

/// Overflow-free logistic for finite or infinite input.
pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// `ln σ(x)` without forming σ(x) first.
pub(crate) fn log_logistic(x: f64) -> f64 {
    if x >= 0.0 {
        -libm::log1p(libm::exp(-x))
    } else {
        x - libm::log1p(libm::exp(x))
    }
}

/// `max(lo, min(x, hi))`.
pub fn clip(x: f64, lo: f64, hi: f64) -> Result<f64> {
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(Error::InvalidArgument(alloc::format!(
            "clip bounds reversed: {lo} > {hi}"
        )));
    }
    Ok(lo.max(x.min(hi)))
}
