//! Minibatch fine-tuning of the projection head, optionally with (λ, c).

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::PairDataset;
use crate::error::{Error, Result};
use crate::loss::{loss, loss_and_grad, LossType, PairBatch, PairItem, SLD_LABEL_FLOOR};
use crate::metrics::{roc_auc, RocCurve};
use crate::model::{CalibrationParams, ParamBounds, SimilarityModel};
use crate::optim::{adamw_step, AdamWConfig, AdamWState};
use crate::store::EmbeddingStore;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub loss: LossType,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Initial λ, or the fixed value outside joint mode.
    pub lambda: f64,
    /// Initial c, or the fixed value outside joint mode.
    pub c: f64,
    /// Optimise λ and c alongside the head.
    pub joint: bool,
    pub seed: u64,
    pub weight_decay: f64,
    pub bounds: Option<ParamBounds>,
    pub adam: AdamWConfig,
}

impl TrainConfig {
    /// Stock hyperparameters for the given loss.
    pub fn defaults(loss: LossType) -> Self {
        Self {
            loss,
            learning_rate: 1e-5,
            epochs: 20,
            batch_size: 16,
            lambda: 0.01,
            c: match loss {
                LossType::Bce => 88.0,
                LossType::Sld => 90.0,
            },
            joint: false,
            seed: 0,
            weight_decay: 0.01,
            bounds: None,
            adam: AdamWConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "weight decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        let calib = CalibrationParams::new(self.lambda, self.c)?;
        if let Some(b) = &self.bounds {
            b.check(&calib)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Full training-set loss after each epoch.
    pub train_loss: Vec<f64>,
    /// Validation AUC after each epoch; `None` when the validation set holds one class.
    pub val_auc: Vec<Option<f64>>,
    /// Validation AUC of the untrained model.
    pub initial_val_auc: Option<f64>,
    pub steps: u64,
    pub model: SimilarityModel,
}

/// Progress passed to [`train_with_observer`] after every optimiser step.
#[derive(Debug, Clone, Copy)]
pub struct StepInfo<'a> {
    pub epoch: usize,
    pub step: u64,
    pub batch_loss: f64,
    pub model: &'a SimilarityModel,
}

pub fn train(
    store: &EmbeddingStore,
    dataset: &PairDataset,
    val: &PairDataset,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    train_with_observer(store, dataset, val, cfg, |_| {})
}

pub fn train_with_observer(
    store: &EmbeddingStore,
    dataset: &PairDataset,
    val: &PairDataset,
    cfg: &TrainConfig,
    mut observer: impl FnMut(&StepInfo<'_>),
) -> Result<TrainReport> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Empty("training set"));
    }
    val.check_embeddings(store)?;
    let items = resolve(store, dataset, cfg.loss)?;
    let dim = items[0].e1.dim();

    let mut model = SimilarityModel::identity(dim, CalibrationParams::new(cfg.lambda, cfg.c)?)?;
    let initial_val_auc = validation_auc(&model, store, val)?;

    let n_weights = dim * dim;
    let mut params = model.head().weights().to_vec();
    let mut mask = alloc::vec![true; n_weights];
    if cfg.joint {
        params.extend([libm::log(cfg.lambda), cfg.c]);
        mask.extend([false, false]);
    }
    let mut state = AdamWState::new(cfg.adam, mask);
    let mut grads = alloc::vec![0.0; params.len()];

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..items.len()).collect();
    let mut train_loss = Vec::with_capacity(cfg.epochs);
    let mut val_auc = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch = PairBatch::new(chunk.iter().map(|&i| items[i]).collect())?;
            let (batch_loss, g) = loss_and_grad(cfg.loss, &model, &batch)?;
            if !batch_loss.is_finite() || !g.is_finite() {
                return Err(Error::NumericalFailure(format!(
                    "non-finite loss or gradient at epoch {epoch}, step {} (loss {batch_loss})",
                    state.step_count() + 1
                )));
            }
            grads[..n_weights].copy_from_slice(&g.d_weights);
            if cfg.joint {
                // Chain rule through λ = exp(ℓ).
                grads[n_weights] = g.d_lambda * model.calibration().lambda();
                grads[n_weights + 1] = g.d_c;
            }
            adamw_step(&mut state, &mut params, &grads, cfg.learning_rate, cfg.weight_decay)?;

            model.head_mut().weights_mut().copy_from_slice(&params[..n_weights]);
            if cfg.joint {
                let mut calib = CalibrationParams::new(libm::exp(params[n_weights]), params[n_weights + 1])
                    .map_err(|e| Error::NumericalFailure(format!("calibration left its domain: {e}")))?;
                if let Some(b) = &cfg.bounds {
                    calib = b.project(calib);
                    params[n_weights] = libm::log(calib.lambda());
                    params[n_weights + 1] = calib.c();
                }
                model.set_calibration(calib);
            }
            observer(&StepInfo {
                epoch,
                step: state.step_count(),
                batch_loss,
                model: &model,
            });
        }

        let full = loss(cfg.loss, &model, &PairBatch::new(items.clone())?)?;
        if !full.is_finite() {
            return Err(Error::NumericalFailure(format!("non-finite training loss after epoch {epoch}")));
        }
        train_loss.push(full);
        val_auc.push(validation_auc(&model, store, val)?);
    }

    Ok(TrainReport {
        train_loss,
        val_auc,
        initial_val_auc,
        steps: state.step_count(),
        model,
    })
}

fn resolve<'a>(store: &'a EmbeddingStore, dataset: &PairDataset, kind: LossType) -> Result<Vec<PairItem<'a>>> {
    dataset
        .pairs()
        .iter()
        .map(|p| {
            let label = match kind {
                LossType::Sld => p.label.max(SLD_LABEL_FLOOR),
                LossType::Bce => p.label,
            };
            Ok(PairItem {
                e1: store.get(&p.q1)?,
                e2: store.get(&p.q2)?,
                label,
            })
        })
        .collect()
}

fn validation_auc(model: &SimilarityModel, store: &EmbeddingStore, val: &PairDataset) -> Result<Option<f64>> {
    match evaluate_roc(model, store, val) {
        Ok(roc) => Ok(Some(roc.auc)),
        Err(Error::SingleClass) | Err(Error::Empty(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// ROC of the model's projected similarity against labels thresholded at 0.5.
pub fn evaluate_roc(model: &SimilarityModel, store: &EmbeddingStore, dataset: &PairDataset) -> Result<RocCurve> {
    if dataset.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let mut scores = Vec::with_capacity(dataset.len());
    let mut labels = Vec::with_capacity(dataset.len());
    for p in dataset.pairs() {
        scores.push(model.similarity(store.get(&p.q1)?, store.get(&p.q2)?)?);
        labels.push(p.label >= 0.5);
    }
    roc_auc(&scores, &labels)
}
