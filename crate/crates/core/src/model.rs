//! The calibrated hit-probability model.
//!
//! Two prompts with base embeddings `a` and `b` are predicted to share a
//! response with probability `σ(cos(W·a, W·b) / λ − c)`, where `W` is a
//! square projection head over frozen base embeddings and `(λ, c)` are the
//! temperature and offset.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::vector::{cosine_slices, l2_norm, logistic, Embedding};

/// Projected vectors shorter than this are rejected.
pub const MIN_PROJECTED_NORM: f64 = 1e-12;

/// Temperature `lambda` and offset `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationParams {
    lambda: f64,
    c: f64,
}

impl CalibrationParams {
    pub fn new(lambda: f64, c: f64) -> Result<Self> {
        if !lambda.is_finite() || !c.is_finite() {
            return Err(Error::InvalidCalibration(format!(
                "lambda={lambda} c={c} must be finite"
            )));
        }
        if lambda <= 0.0 {
            return Err(Error::InvalidCalibration(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        Ok(Self { lambda, c })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

/// Lower bound on `lambda` and symmetric bound on `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamBounds {
    pub lambda_min: f64,
    pub c_max: f64,
}

impl ParamBounds {
    pub fn new(lambda_min: f64, c_max: f64) -> Result<Self> {
        if !(lambda_min.is_finite() && lambda_min > 0.0 && c_max.is_finite() && c_max > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "bounds must be positive and finite: lambda_min={lambda_min} c_max={c_max}"
            )));
        }
        Ok(Self { lambda_min, c_max })
    }

    pub fn contains(&self, calib: &CalibrationParams) -> bool {
        calib.lambda >= self.lambda_min && calib.c.abs() <= self.c_max
    }

    pub fn check(&self, calib: &CalibrationParams) -> Result<()> {
        if self.contains(calib) {
            Ok(())
        } else {
            Err(Error::InvalidCalibration(format!(
                "lambda={} c={} violate bounds lambda>={} |c|<={}",
                calib.lambda, calib.c, self.lambda_min, self.c_max
            )))
        }
    }

    /// Nearest point inside the bounds.
    pub fn project(&self, calib: CalibrationParams) -> CalibrationParams {
        CalibrationParams {
            lambda: calib.lambda.max(self.lambda_min),
            c: calib.c.clamp(-self.c_max, self.c_max),
        }
    }
}

/// A `d × d` row-major linear map applied to base embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionHead {
    dim: usize,
    weights: Vec<f64>,
}

impl ProjectionHead {
    pub fn identity(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptyEmbedding);
        }
        let mut weights = vec![0.0; dim * dim];
        for i in 0..dim {
            weights[i * dim + i] = 1.0;
        }
        Ok(Self { dim, weights })
    }

    pub fn from_weights(dim: usize, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptyEmbedding);
        }
        if weights.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("projection weights"));
        }
        Ok(Self { dim, weights })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    /// `W · x` without validation.
    pub(crate) fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(x).map(|(w, v)| w * v).sum())
            .collect()
    }

    fn check_dim(&self, e: &Embedding) -> Result<()> {
        if e.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: e.dim(),
            });
        }
        Ok(())
    }
}

/// Forward-pass intermediates for one pair, reused by the gradient code.
#[derive(Debug, Clone)]
pub(crate) struct PairForward {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub norm_x: f64,
    pub norm_y: f64,
    pub sim: f64,
    pub logit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityModel {
    head: ProjectionHead,
    calib: CalibrationParams,
}

impl SimilarityModel {
    pub fn new(head: ProjectionHead, calib: CalibrationParams) -> Self {
        Self { head, calib }
    }

    /// Identity head: predictions equal the untrained base-embedding model.
    pub fn identity(dim: usize, calib: CalibrationParams) -> Result<Self> {
        Ok(Self::new(ProjectionHead::identity(dim)?, calib))
    }

    pub fn head(&self) -> &ProjectionHead {
        &self.head
    }

    pub fn calibration(&self) -> CalibrationParams {
        self.calib
    }

    pub fn dim(&self) -> usize {
        self.head.dim
    }

    pub(crate) fn head_mut(&mut self) -> &mut ProjectionHead {
        &mut self.head
    }

    pub fn set_calibration(&mut self, calib: CalibrationParams) {
        self.calib = calib;
    }

    pub fn project(&self, e: &Embedding) -> Result<Embedding> {
        self.head.check_dim(e)?;
        let x = self.head.apply(e.as_slice());
        let norm = l2_norm(&x);
        if norm.is_nan() || norm < MIN_PROJECTED_NORM {
            return Err(Error::DegenerateProjection { norm });
        }
        Embedding::new(x)
    }

    pub(crate) fn forward(&self, e1: &Embedding, e2: &Embedding) -> Result<PairForward> {
        self.head.check_dim(e1)?;
        self.head.check_dim(e2)?;
        let x = self.head.apply(e1.as_slice());
        let y = self.head.apply(e2.as_slice());
        let (norm_x, norm_y) = (l2_norm(&x), l2_norm(&y));
        for norm in [norm_x, norm_y] {
            if norm.is_nan() || norm < MIN_PROJECTED_NORM {
                return Err(Error::DegenerateProjection { norm });
            }
        }
        let sim = cosine_slices(&x, &y)?;
        let logit = sim / self.calib.lambda - self.calib.c;
        Ok(PairForward {
            x,
            y,
            norm_x,
            norm_y,
            sim,
            logit,
        })
    }

    /// Cosine similarity of the projected embeddings.
    pub fn similarity(&self, e1: &Embedding, e2: &Embedding) -> Result<f64> {
        Ok(self.forward(e1, e2)?.sim)
    }

    /// The argument of the sigmoid: `cos(W·e1, W·e2) / λ − c`.
    pub fn logit(&self, e1: &Embedding, e2: &Embedding) -> Result<f64> {
        Ok(self.forward(e1, e2)?.logit)
    }

    pub fn predict_prob(&self, e1: &Embedding, e2: &Embedding) -> Result<f64> {
        Ok(logistic(self.logit(e1, e2)?))
    }
}

/// Anything that assigns a hit probability to a pair of embeddings.
pub trait PairProbability {
    fn probability(&self, e1: &Embedding, e2: &Embedding) -> Result<f64>;
}

impl PairProbability for SimilarityModel {
    fn probability(&self, e1: &Embedding, e2: &Embedding) -> Result<f64> {
        self.predict_prob(e1, e2)
    }
}

impl<F> PairProbability for F
where
    F: Fn(&Embedding, &Embedding) -> f64,
{
    fn probability(&self, e1: &Embedding, e2: &Embedding) -> Result<f64> {
        Ok(self(e1, e2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::cosine_similarity;
    use proptest::prelude::*;

    fn e(v: &[f64]) -> Embedding {
        Embedding::new(v.to_vec()).unwrap()
    }

    fn stock_defaults() -> CalibrationParams {
        CalibrationParams::new(0.01, 88.0).unwrap()
    }

    /// Unit vector in the plane with cosine `s` to `[1, 0]`.
    fn at_cosine(s: f64) -> Embedding {
        e(&[s, libm::sqrt(1.0 - s * s)])
    }

    #[test]
    fn project_examples() {
        let calib = CalibrationParams::new(1.0, 0.0).unwrap();
        let m = SimilarityModel::identity(2, calib).unwrap();
        assert_eq!(m.project(&e(&[0.6, 0.8])).unwrap().as_slice(), &[0.6, 0.8]);

        let scale = ProjectionHead::from_weights(2, vec![2.0, 0.0, 0.0, 2.0]).unwrap();
        let m = SimilarityModel::new(scale, calib);
        assert_eq!(m.project(&e(&[1.0, 0.0])).unwrap().as_slice(), &[2.0, 0.0]);

        let swap = ProjectionHead::from_weights(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let m = SimilarityModel::new(swap, calib);
        assert_eq!(m.project(&e(&[1.0, 0.0])).unwrap().as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn degenerate_projection_rejected() {
        let calib = CalibrationParams::new(1.0, 0.0).unwrap();
        let kill_x = ProjectionHead::from_weights(2, vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        let m = SimilarityModel::new(kill_x, calib);
        assert!(matches!(
            m.project(&e(&[1.0, 0.0])),
            Err(Error::DegenerateProjection { .. })
        ));
        assert!(m.predict_prob(&e(&[1.0, 0.0]), &e(&[0.0, 1.0])).is_err());
    }

    #[test]
    fn dimension_checks() {
        let m = SimilarityModel::identity(3, stock_defaults()).unwrap();
        assert!(matches!(
            m.logit(&e(&[1.0, 0.0]), &e(&[1.0, 0.0])),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(ProjectionHead::from_weights(2, vec![1.0; 3]).is_err());
        assert!(ProjectionHead::from_weights(1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn calibration_validation() {
        assert!(CalibrationParams::new(0.0, 1.0).is_err());
        assert!(CalibrationParams::new(-1.0, 1.0).is_err());
        assert!(CalibrationParams::new(f64::INFINITY, 1.0).is_err());
        let b = ParamBounds::new(0.01, 5.0).unwrap();
        assert!(b.check(&CalibrationParams::new(0.005, 0.0).unwrap()).is_err());
        assert!(b.check(&CalibrationParams::new(0.5, -6.0).unwrap()).is_err());
        let p = b.project(CalibrationParams::new(0.005, -6.0).unwrap());
        assert_eq!((p.lambda(), p.c()), (0.01, -5.0));
    }

    #[test]
    fn logit_examples() {
        let m = SimilarityModel::identity(2, stock_defaults()).unwrap();
        let a = e(&[1.0, 0.0]);
        assert!((m.logit(&a, &a).unwrap() - 12.0).abs() < 1e-9);
        assert!(m.logit(&a, &at_cosine(0.88)).unwrap().abs() < 1e-9);

        let unit = SimilarityModel::identity(2, CalibrationParams::new(1.0, 0.0).unwrap()).unwrap();
        let b = e(&[0.3, -0.7]);
        assert_eq!(unit.logit(&a, &b).unwrap(), cosine_similarity(&a, &b).unwrap());
    }

    #[test]
    fn predict_prob_examples() {
        let m = SimilarityModel::identity(2, stock_defaults()).unwrap();
        let a = e(&[1.0, 0.0]);
        assert!((m.predict_prob(&a, &at_cosine(0.88)).unwrap() - 0.5).abs() < 1e-9);
        // σ(2) = 0.8807970779778823; the logit carries ~1e-13 rounding from 0.90/0.01.
        assert!((m.predict_prob(&a, &at_cosine(0.90)).unwrap() - 0.8807970779778823).abs() < 1e-12);
        assert!((m.predict_prob(&a, &a).unwrap() - 0.9999938558253978).abs() < 1e-15);
    }

    fn vec3() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1.0f64..1.0, 3).prop_filter("nonzero", |v| l2_norm(v) > 1e-2)
    }

    fn head3() -> impl Strategy<Value = ProjectionHead> {
        prop::collection::vec(-1.0f64..1.0, 9)
            .prop_map(|mut w| {
                for i in 0..3 {
                    w[i * 3 + i] += 3.0;
                }
                ProjectionHead::from_weights(3, w).unwrap()
            })
    }

    proptest! {
        #[test]
        fn predict_prob_symmetric(h in head3(), a in vec3(), b in vec3(), lambda in 0.05f64..2.0, c in -3.0f64..3.0) {
            let m = SimilarityModel::new(h, CalibrationParams::new(lambda, c).unwrap());
            let (a, b) = (e(&a), e(&b));
            prop_assert_eq!(m.predict_prob(&a, &b).unwrap(), m.predict_prob(&b, &a).unwrap());
        }

        #[test]
        fn predict_prob_scale_invariant(h in head3(), a in vec3(), b in vec3(), alpha in 1e-2f64..1e2) {
            let m = SimilarityModel::new(h, CalibrationParams::new(0.5, 0.3).unwrap());
            let (a, b) = (e(&a), e(&b));
            let p = m.predict_prob(&a, &b).unwrap();
            prop_assert!((p - m.predict_prob(&a.scaled(alpha).unwrap(), &b).unwrap()).abs() <= 1e-12);
            prop_assert!((p - m.predict_prob(&a, &b.scaled(alpha).unwrap()).unwrap()).abs() <= 1e-12);
        }

        #[test]
        fn predict_prob_monotone_in_similarity(s1 in -0.99f64..0.99, ds in 1e-3f64..0.5, lambda in 0.1f64..2.0, c in -2.0f64..2.0) {
            let s2 = (s1 + ds).min(1.0);
            prop_assume!(s2 > s1);
            let m = SimilarityModel::identity(2, CalibrationParams::new(lambda, c).unwrap()).unwrap();
            let a = e(&[1.0, 0.0]);
            prop_assert!(m.predict_prob(&a, &at_cosine(s2)).unwrap() > m.predict_prob(&a, &at_cosine(s1)).unwrap());
        }

        #[test]
        fn identity_model_uses_raw_similarity(a in vec3(), b in vec3(), lambda in 0.05f64..2.0, c in -3.0f64..3.0) {
            let calib = CalibrationParams::new(lambda, c).unwrap();
            let m = SimilarityModel::identity(3, calib).unwrap();
            let (a, b) = (e(&a), e(&b));
            let raw = logistic(cosine_similarity(&a, &b).unwrap() / lambda - c);
            prop_assert!((m.predict_prob(&a, &b).unwrap() - raw).abs() <= 1e-15);
        }
    }
}
