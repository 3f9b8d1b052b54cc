//! ROC curves, AUC and mean absolute probability error.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::model::PairProbability;
use crate::vector::Embedding;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// ROC curve over every distinct score, with trapezoidal AUC.
///
/// Tied scores form one threshold, so a tie between a positive and a
/// negative contributes half credit and the area equals the Mann–Whitney
/// statistic. The area is accumulated in integer counts and divided once.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            found: labels.len(),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("scores"));
    }
    let positives = labels.iter().filter(|&&l| l).count() as u64;
    let negatives = labels.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));

    let (pos_f, neg_f) = (positives as f64, negatives as f64);
    let mut points = Vec::with_capacity(scores.len() + 1);
    points.push(RocPoint { fpr: 0.0, tpr: 0.0 });

    let (mut tp, mut fp) = (0u64, 0u64);
    // Twice the area in units of one (positive, negative) pair.
    let mut doubled_area: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        let (mut group_tp, mut group_fp) = (0u64, 0u64);
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] {
                group_tp += 1;
            } else {
                group_fp += 1;
            }
            i += 1;
        }
        doubled_area += u128::from(group_fp) * u128::from(2 * tp + group_tp);
        tp += group_tp;
        fp += group_fp;
        points.push(RocPoint {
            fpr: fp as f64 / neg_f,
            tpr: tp as f64 / pos_f,
        });
    }

    let auc = doubled_area as f64 / (2.0 * pos_f * neg_f);
    Ok(RocCurve { points, auc })
}

/// Mean of `|P⋆ − P̂|` over the evaluation pairs.
pub fn mean_abs_error<M, T>(model: &M, truth: &T, pairs: &[(&Embedding, &Embedding)]) -> Result<f64>
where
    M: PairProbability + ?Sized,
    T: PairProbability + ?Sized,
{
    if pairs.is_empty() {
        return Err(Error::Empty("evaluation pair set"));
    }
    let mut total = 0.0;
    for (a, b) in pairs {
        total += (truth.probability(a, b)? - model.probability(a, b)?).abs();
    }
    Ok(total / pairs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CalibrationParams, SimilarityModel};
    use alloc::vec;

    #[test]
    fn perfect_and_inverted() {
        assert_eq!(roc_auc(&[0.1, 0.2, 0.9], &[false, false, true]).unwrap().auc, 1.0);
        assert_eq!(roc_auc(&[0.9, 0.1], &[false, true]).unwrap().auc, 0.0);
    }

    #[test]
    fn ties_get_half_credit() {
        assert_eq!(roc_auc(&[0.5, 0.5], &[true, false]).unwrap().auc, 0.5);
        let c = roc_auc(&[0.3, 0.5, 0.5, 0.7], &[false, true, false, true]).unwrap();
        // Pairs: (0.5+,0.3-)=1, (0.5+,0.5-)=½, (0.7+,·)=2 → 3.5 / 4.
        assert_eq!(c.auc, 0.875);
    }

    #[test]
    fn curve_shape() {
        let c = roc_auc(&[0.2, 0.4, 0.4, 0.9, 0.1], &[true, false, true, true, false]).unwrap();
        assert_eq!(c.points.first(), Some(&RocPoint { fpr: 0.0, tpr: 0.0 }));
        assert_eq!(c.points.last(), Some(&RocPoint { fpr: 1.0, tpr: 1.0 }));
        // Four distinct scores plus the origin.
        assert_eq!(c.points.len(), 5);
        for w in c.points.windows(2) {
            assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
        }
    }

    #[test]
    fn alternating_hard_sequence() {
        // Ascending scores with labels 0,1,0,1,... and k = 5 of each.
        let scores: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let labels: Vec<bool> = (0..10).map(|i| i % 2 == 1).collect();
        assert!((roc_auc(&scores, &labels).unwrap().auc - 0.6).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert_eq!(roc_auc(&[0.1, 0.2], &[true, true]), Err(Error::SingleClass));
        assert!(roc_auc(&[0.1], &[true, false]).is_err());
        assert!(roc_auc(&[f64::NAN, 0.2], &[true, false]).is_err());
    }

    #[test]
    fn mean_abs_error_examples() {
        let a = Embedding::new(vec![1.0, 0.0]).unwrap();
        let b = Embedding::new(vec![0.6, 0.8]).unwrap();
        let pairs = [(&a, &b), (&b, &a)];
        let half = |_: &Embedding, _: &Embedding| 0.5;
        let one = |_: &Embedding, _: &Embedding| 1.0;
        assert_eq!(mean_abs_error(&half, &one, &pairs).unwrap(), 0.5);

        let m = SimilarityModel::identity(2, CalibrationParams::new(0.3, 1.0).unwrap()).unwrap();
        assert_eq!(mean_abs_error(&m, &m.clone(), &pairs).unwrap(), 0.0);
        assert_eq!(mean_abs_error(&m, &m, &[]), Err(Error::Empty("evaluation pair set")));
    }

    #[test]
    fn mean_abs_error_hand_enumeration() {
        // Two identity models on four hand-built pairs in the plane:
        // model λ=1,c=0 and truth λ=0.5,c=1 at cosines 1, 0, -1, 0.6.
        let x = Embedding::new(vec![1.0, 0.0]).unwrap();
        let y = Embedding::new(vec![0.0, 1.0]).unwrap();
        let nx = Embedding::new(vec![-1.0, 0.0]).unwrap();
        let w = Embedding::new(vec![0.6, 0.8]).unwrap();
        let pairs = [(&x, &x), (&x, &y), (&x, &nx), (&x, &w)];
        let model = SimilarityModel::identity(2, CalibrationParams::new(1.0, 0.0).unwrap()).unwrap();
        let truth = SimilarityModel::identity(2, CalibrationParams::new(0.5, 1.0).unwrap()).unwrap();
        // |σ(1)-σ(1)| + |σ(0)-σ(-1)| + |σ(-1)-σ(-3)| + |σ(0.6)-σ(0.2)|, from a 40-digit evaluation.
        let expected = (0.0
            + 0.23105857863000488
            + 0.22151554819242834
            + 0.09582230891331754)
            / 4.0;
        assert!((mean_abs_error(&model, &truth, &pairs).unwrap() - expected).abs() < 1e-15);
    }
}
