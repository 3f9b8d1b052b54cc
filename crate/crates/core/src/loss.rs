//! Batch-mean BCE and SLD losses with closed-form gradients.
//!
//! Both losses depend on the model only through the per-pair logit
//! `z = s / λ − c`, with `s` the cosine of the projected pair. Each gradient
//! routine computes `∂ℓ/∂z` per pair and then chains through
//! `∂z/∂s = 1/λ`, `∂z/∂λ = −s/λ²`, `∂z/∂c = −1` and
//! `∂s/∂x = y/(‖x‖‖y‖) − s·x/‖x‖²` with `x = W·a`, `y = W·b`.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::model::SimilarityModel;
use crate::vector::{log_logistic, logistic, Embedding};

/// Probabilities inside BCE logarithms are kept in `[GUARD, 1 − GUARD]`.
pub const BCE_PROBABILITY_GUARD: f64 = 1e-15;

/// Lower clip applied to SLD labels before training.
pub const SLD_LABEL_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossType {
    Bce,
    Sld,
}

impl LossType {
    pub fn as_str(self) -> &'static str {
        match self {
            LossType::Bce => "bce",
            LossType::Sld => "sld",
        }
    }
}

impl fmt::Display for LossType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bce" => Ok(LossType::Bce),
            "sld" => Ok(LossType::Sld),
            _ => Err(Error::NotImplemented(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PairItem<'a> {
    pub e1: &'a Embedding,
    pub e2: &'a Embedding,
    pub label: f64,
}

/// A non-empty batch of embedded, labelled pairs with a common dimension.
#[derive(Debug, Clone)]
pub struct PairBatch<'a> {
    items: Vec<PairItem<'a>>,
}

impl<'a> PairBatch<'a> {
    pub fn new(items: Vec<PairItem<'a>>) -> Result<Self> {
        let first = items.first().ok_or(Error::Empty("pair batch"))?;
        let dim = first.e1.dim();
        for item in &items {
            for e in [item.e1, item.e2] {
                if e.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: e.dim(),
                    });
                }
            }
            if !(0.0..=1.0).contains(&item.label) {
                return Err(Error::LabelOutOfRange { label: item.label });
            }
        }
        Ok(Self { items })
    }

    pub fn items(&self) -> &[PairItem<'a>] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Gradient of a batch loss with respect to `W` (row-major), `λ` and `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub d_weights: Vec<f64>,
    pub d_lambda: f64,
    pub d_c: f64,
}

impl GradientSet {
    pub fn zeros(dim: usize) -> Self {
        Self {
            d_weights: vec![0.0; dim * dim],
            d_lambda: 0.0,
            d_c: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.d_lambda.is_finite() && self.d_c.is_finite() && self.d_weights.iter().all(|g| g.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.d_weights
            .iter()
            .chain([&self.d_lambda, &self.d_c])
            .fold(0.0f64, |m, g| m.max(g.abs()))
    }
}

fn guarded_log(log_p: f64) -> (f64, bool) {
    let floor = libm::log(BCE_PROBABILITY_GUARD);
    if log_p < floor {
        (floor, false)
    } else {
        (log_p, true)
    }
}

/// Per-pair BCE value and `∂ℓ/∂z`.
fn bce_term(label: f64, z: f64) -> (f64, f64) {
    let (log_p, p_active) = guarded_log(log_logistic(z));
    let (log_q, q_active) = guarded_log(log_logistic(-z));
    let value = -(label * log_p + (1.0 - label) * log_q);
    let p = logistic(z);
    let mut dz = 0.0;
    if p_active {
        dz -= label * logistic(-z);
    }
    if q_active {
        dz += (1.0 - label) * p;
    }
    (value, dz)
}

fn check_sld_label(label: f64) -> Result<f64> {
    if label <= 0.0 {
        return Err(Error::UnclippedLabel { label });
    }
    Ok(libm::log(label))
}

/// Per-pair SLD value and `∂ℓ/∂z`.
fn sld_term(log_label: f64, z: f64) -> (f64, f64) {
    let diff = log_label - log_logistic(z);
    (diff * diff, -2.0 * diff * logistic(-z))
}

fn mean_loss(
    model: &SimilarityModel,
    batch: &PairBatch<'_>,
    mut term: impl FnMut(f64, f64) -> Result<f64>,
) -> Result<f64> {
    let mut total = 0.0;
    for item in batch.items() {
        let z = model.logit(item.e1, item.e2)?;
        total += term(item.label, z)?;
    }
    Ok(total / batch.len() as f64)
}

pub fn bce_loss(model: &SimilarityModel, batch: &PairBatch<'_>) -> Result<f64> {
    mean_loss(model, batch, |p, z| Ok(bce_term(p, z).0))
}

/// Labels must already be clipped to `[1e-10, 1]`.
pub fn sld_loss(model: &SimilarityModel, batch: &PairBatch<'_>) -> Result<f64> {
    mean_loss(model, batch, |p, z| Ok(sld_term(check_sld_label(p)?, z).0))
}

pub fn loss(kind: LossType, model: &SimilarityModel, batch: &PairBatch<'_>) -> Result<f64> {
    match kind {
        LossType::Bce => bce_loss(model, batch),
        LossType::Sld => sld_loss(model, batch),
    }
}

/// Batch-mean loss and its gradient in one pass.
pub fn loss_and_grad(
    kind: LossType,
    model: &SimilarityModel,
    batch: &PairBatch<'_>,
) -> Result<(f64, GradientSet)> {
    let dim = model.dim();
    let calib = model.calibration();
    let lambda = calib.lambda();
    let mut grads = GradientSet::zeros(dim);
    let mut total = 0.0;
    let mut ds_dx = vec![0.0; dim];
    let mut ds_dy = vec![0.0; dim];

    for item in batch.items() {
        let fwd = model.forward(item.e1, item.e2)?;
        let (value, dl_dz) = match kind {
            LossType::Bce => bce_term(item.label, fwd.logit),
            LossType::Sld => sld_term(check_sld_label(item.label)?, fwd.logit),
        };
        total += value;

        grads.d_lambda += dl_dz * (-fwd.sim / (lambda * lambda));
        grads.d_c -= dl_dz;

        let dl_ds = dl_dz / lambda;
        let nxy = fwd.norm_x * fwd.norm_y;
        let (sx, sy) = (
            fwd.sim / (fwd.norm_x * fwd.norm_x),
            fwd.sim / (fwd.norm_y * fwd.norm_y),
        );
        for i in 0..dim {
            ds_dx[i] = dl_ds * (fwd.y[i] / nxy - sx * fwd.x[i]);
            ds_dy[i] = dl_ds * (fwd.x[i] / nxy - sy * fwd.y[i]);
        }
        let (a, b) = (item.e1.as_slice(), item.e2.as_slice());
        for (i, row) in grads.d_weights.chunks_exact_mut(dim).enumerate() {
            let (gx, gy) = (ds_dx[i], ds_dy[i]);
            for ((g, &aj), &bj) in row.iter_mut().zip(a).zip(b) {
                *g += gx * aj + gy * bj;
            }
        }
    }

    let n = batch.len() as f64;
    for g in &mut grads.d_weights {
        *g /= n;
    }
    grads.d_lambda /= n;
    grads.d_c /= n;
    Ok((total / n, grads))
}

pub fn bce_grad(model: &SimilarityModel, batch: &PairBatch<'_>) -> Result<GradientSet> {
    Ok(loss_and_grad(LossType::Bce, model, batch)?.1)
}

pub fn sld_grad(model: &SimilarityModel, batch: &PairBatch<'_>) -> Result<GradientSet> {
    Ok(loss_and_grad(LossType::Sld, model, batch)?.1)
}

/// Binary entropy in nats; `0 ln 0` is taken as 0.
pub fn binary_entropy(p: f64) -> f64 {
    let h = |q: f64| if q > 0.0 { -q * libm::log(q) } else { 0.0 };
    h(p) + h(1.0 - p)
}

/// `KL(Bern(p) ‖ Bern(q))` in nats.
pub fn bernoulli_kl(p: f64, q: f64) -> f64 {
    let term = |a: f64, b: f64| if a > 0.0 { a * libm::log(a / b) } else { 0.0 };
    term(p, q) + term(1.0 - p, 1.0 - q)
}
