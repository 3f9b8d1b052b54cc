//! Embedding-similarity prompt caching.
//!
//! Two prompts can share a cached response with probability
//! `σ(cos(W·a, W·b)/λ − c)`, where `a` and `b` are frozen base embeddings and
//! `W` is a trainable projection. This crate holds the model, its losses and
//! training loop, pair mining and hard-dataset construction, exact nearest
//! neighbour search, ROC evaluation, a streaming cache simulator, and
//! synthetic worlds for checking all of the above.
//!
//! Everything here is `no_std` with `alloc`; file formats and the command
//! line live in the `promptcache` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dataset;
pub mod error;
pub mod index;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod simcache;
pub mod store;
pub mod synth;
pub mod train;
pub mod vector;

pub use dataset::{LabeledPair, PairDataset, SplitRatios};
pub use error::{Error, Result};
pub use index::{Neighbour, VectorIndex};
pub use loss::LossType;
pub use metrics::{roc_auc, RocCurve, RocPoint};
pub use model::{CalibrationParams, PairProbability, ParamBounds, ProjectionHead, SimilarityModel};
pub use simcache::{HitJudge, HitOracle, SimReport};
pub use store::EmbeddingStore;
pub use train::{TrainConfig, TrainReport};
pub use vector::{cosine_similarity, Embedding, Prompt};
