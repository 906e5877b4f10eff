//! Threshold-free and threshold-dependent binary classification metrics.
//!
//! Positive predictions always use a closed threshold: `prob >= t`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Parameter(format!("{a} scores but {b} labels")));
    }
    Ok(())
}

fn class_counts(labels: &[u8]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&y| y == 1).count();
    (pos, labels.len() - pos)
}

/// Ascending sort order of `scores`, NaN-free input assumed.
fn ascending(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    idx
}

/// Area under the ROC curve as the Mann-Whitney probability
/// `P(s+ > s-) + P(s+ = s-) / 2`, using midranks for ties.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_lengths(scores.len(), labels.len())?;
    let (pos, neg) = class_counts(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric("ROC-AUC needs both classes".into()));
    }
    let order = ascending(scores);
    // Sum of (doubled) midranks of the positives keeps everything integral.
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1, midrank = (i + j + 2) / 2
        let twice_mid = (i + j + 2) as u128;
        let group_pos = order[i..=j].iter().filter(|&&k| labels[k] == 1).count() as u128;
        twice_rank_sum += twice_mid * group_pos;
        i = j + 1;
    }
    let (p, n) = (pos as u128, neg as u128);
    // U = R+ - p(p+1)/2, doubled
    let twice_u = twice_rank_sum - p * (p + 1);
    Ok(twice_u as f64 / (2 * p * n) as f64)
}

/// Average precision: sum over descending score cuts of
/// `(recall gain) * precision`, with tied scores entering together.
pub fn average_precision(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_lengths(scores.len(), labels.len())?;
    let (pos, _) = class_counts(labels);
    if pos == 0 {
        return Err(Error::UndefinedMetric("average precision needs a positive".into()));
    }
    let mut order = ascending(scores);
    order.reverse();
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut ap = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let group_tp = order[i..=j].iter().filter(|&&k| labels[k] == 1).count();
        tp += group_tp;
        seen += j - i + 1;
        if group_tp > 0 {
            ap += (group_tp as f64 / pos as f64) * (tp as f64 / seen as f64);
        }
        i = j + 1;
    }
    Ok(ap)
}

/// Mean squared error between probabilities and outcomes.
pub fn brier(probs: &[f64], labels: &[u8]) -> Result<f64> {
    check_lengths(probs.len(), labels.len())?;
    if probs.is_empty() {
        return Err(Error::EmptyInput("no probabilities".into()));
    }
    if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Parameter(format!("probability {p} outside [0, 1]")));
    }
    let sum: f64 = probs
        .iter()
        .zip(labels)
        .map(|(p, &y)| (p - f64::from(y)).powi(2))
        .sum();
    Ok(sum / probs.len() as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn from_decisions(decisions: &[bool], labels: &[u8]) -> Self {
        let mut c = ConfusionCounts::default();
        for (&d, &y) in decisions.iter().zip(labels) {
            match (d, y == 1) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }
}

pub fn confusion_at(probs: &[f64], labels: &[u8], threshold: f64) -> ConfusionCounts {
    let decisions: Vec<bool> = probs.iter().map(|&p| p >= threshold).collect();
    ConfusionCounts::from_decisions(&decisions, labels)
}

/// `F_beta` from precision and recall; 0 when both are 0.
pub fn fbeta_from_pr(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * precision + recall;
    if denom == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / denom
    }
}

/// `F_beta` from counts, `(1+b^2) tp / ((1+b^2) tp + b^2 fn + fp)`.
pub(crate) fn fbeta_counts(tp: usize, fp: usize, fn_: usize, beta: f64) -> f64 {
    if tp == 0 {
        return 0.0;
    }
    let b2 = beta * beta;
    let num = (1.0 + b2) * tp as f64;
    num / (num + b2 * fn_ as f64 + fp as f64)
}

/// Metrics derived from a confusion matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub f1: f64,
    pub f2: f64,
    /// `F_beta` at the requested beta.
    pub fbeta: f64,
    pub mcc: f64,
}

/// Zero-denominator conventions: precision with no predicted positives is 0,
/// specificity with no negatives is 0, MCC with any empty margin is 0; recall
/// with no actual positives is an error.
pub fn classification_bundle(counts: ConfusionCounts, beta: f64) -> Result<ClassificationMetrics> {
    if !(beta > 0.0) {
        return Err(Error::Parameter(format!("beta must be positive, got {beta}")));
    }
    if counts.total() == 0 {
        return Err(Error::EmptyInput("empty confusion matrix".into()));
    }
    let ConfusionCounts { tp, fp, fn_, tn } = counts;
    if tp + fn_ == 0 {
        return Err(Error::UndefinedMetric("recall needs at least one positive".into()));
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let (tpf, fpf, fnf, tnf) = (tp as f64, fp as f64, fn_ as f64, tn as f64);
    let marg = (tpf + fpf) * (tpf + fnf) * (tnf + fpf) * (tnf + fnf);
    let mcc = if marg == 0.0 {
        0.0
    } else {
        (tpf * tnf - fpf * fnf) / marg.sqrt()
    };
    Ok(ClassificationMetrics {
        accuracy: ratio(tp + tn, counts.total()),
        precision,
        recall,
        specificity: ratio(tn, tn + fp),
        f1: fbeta_counts(tp, fp, fn_, 1.0),
        f2: fbeta_counts(tp, fp, fn_, 2.0),
        fbeta: fbeta_counts(tp, fp, fn_, beta),
        mcc,
    })
}

/// Full metric set for one set of probabilities and hard decisions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricBundle {
    pub roc_auc: f64,
    pub pr_auc: f64,
    pub brier: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub f2: f64,
    pub mcc: f64,
    pub specificity: f64,
}

impl MetricBundle {
    /// Threshold-free metrics from `probs`, the rest from `decisions`.
    pub fn from_decisions(probs: &[f64], labels: &[u8], decisions: &[bool]) -> Result<Self> {
        check_lengths(decisions.len(), labels.len())?;
        let c = classification_bundle(ConfusionCounts::from_decisions(decisions, labels), 2.0)?;
        Ok(MetricBundle {
            roc_auc: roc_auc(probs, labels)?,
            pr_auc: average_precision(probs, labels)?,
            brier: brier(probs, labels)?,
            accuracy: c.accuracy,
            precision: c.precision,
            recall: c.recall,
            f1: c.f1,
            f2: c.f2,
            mcc: c.mcc,
            specificity: c.specificity,
        })
    }

    pub fn at_threshold(probs: &[f64], labels: &[u8], threshold: f64) -> Result<Self> {
        let decisions: Vec<bool> = probs.iter().map(|&p| p >= threshold).collect();
        Self::from_decisions(probs, labels, &decisions)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub fbeta: f64,
}

/// Precision / recall / F1 / F-beta at each grid threshold.
pub fn threshold_curve(probs: &[f64], labels: &[u8], grid: &[f64], beta: f64) -> Result<Vec<CurvePoint>> {
    check_lengths(probs.len(), labels.len())?;
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Parameter("threshold grid must be sorted ascending".into()));
    }
    grid.iter()
        .map(|&t| {
            let m = classification_bundle(confusion_at(probs, labels, t), beta)?;
            Ok(CurvePoint {
                t,
                precision: m.precision,
                recall: m.recall,
                f1: m.f1,
                fbeta: m.fbeta,
            })
        })
        .collect()
}

/// Write a curve as CSV with columns `t, precision, recall, f1, f2`.
pub fn write_curve_csv<W: Write>(curve: &[CurvePoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "precision", "recall", "f1", "f2"])?;
    for p in curve {
        w.write_record([p.t, p.precision, p.recall, p.f1, p.fbeta].map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Evenly spaced grid `0, 1/steps, ..., 1`.
pub fn uniform_grid(steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| i as f64 / steps as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_auc(scores: &[f64], labels: &[u8]) -> f64 {
        let mut num = 0.0;
        let mut pairs = 0.0;
        for (i, &yi) in labels.iter().enumerate() {
            for (j, &yj) in labels.iter().enumerate() {
                if yi == 1 && yj == 0 {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / pairs
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.8, 0.6, 0.4, 0.7], &[1, 0, 1, 0]).unwrap(), 0.5);
        assert_eq!(roc_auc(&[0.5, 0.5], &[1, 0]).unwrap(), 0.5);
        assert!(matches!(roc_auc(&[0.1, 0.2], &[1, 1]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn average_precision_examples() {
        assert!((average_precision(&[0.9, 0.8, 0.7], &[1, 0, 1]).unwrap() - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(average_precision(&[0.3, 0.2, 0.9], &[1, 1, 1]).unwrap(), 1.0);
        assert_eq!(average_precision(&[0.9, 0.8, 0.1], &[1, 1, 0]).unwrap(), 1.0);
        assert!(average_precision(&[0.9], &[0]).is_err());
        // a tie between a positive and a negative enters together
        assert_eq!(average_precision(&[0.5, 0.5], &[1, 0]).unwrap(), 0.5);
    }

    #[test]
    fn brier_examples() {
        assert_eq!(brier(&[1.0, 0.0], &[1, 0]).unwrap(), 0.0);
        assert_eq!(brier(&[0.5, 0.5, 0.5], &[1, 0, 1]).unwrap(), 0.25);
        assert!((brier(&[0.8, 0.3], &[1, 0]).unwrap() - 0.065).abs() < 1e-12);
        assert!(brier(&[1.2], &[1]).is_err());
    }

    #[test]
    fn confusion_examples() {
        let probs = [0.1, 0.6, 0.4, 0.9];
        let labels = [0, 1, 0, 1];
        let all = confusion_at(&probs, &labels, 0.0);
        assert_eq!((all.fn_, all.tn), (0, 0));
        let none = confusion_at(&probs, &labels, 0.9 + 1e-9);
        assert_eq!((none.tp, none.fp), (0, 0));
        let c = confusion_at(&[0.6, 0.4], &[1, 0], 0.5);
        assert_eq!(c, ConfusionCounts { tp: 1, fp: 0, fn_: 0, tn: 1 });
    }

    #[test]
    fn bundle_examples() {
        assert!((fbeta_from_pr(0.758, 0.919, 1.0) - 0.831).abs() < 1e-3);
        assert!((fbeta_from_pr(0.758, 0.919, 2.0) - 0.881).abs() < 1e-3);
        let perfect = classification_bundle(ConfusionCounts { tp: 5, fp: 0, fn_: 0, tn: 5 }, 2.0).unwrap();
        for v in [perfect.accuracy, perfect.precision, perfect.recall, perfect.f1, perfect.f2, perfect.mcc, perfect.specificity] {
            assert_eq!(v, 1.0);
        }
        let m = classification_bundle(ConfusionCounts { tp: 3, fp: 1, fn_: 0, tn: 1 }, 2.0).unwrap();
        assert_eq!((m.precision, m.recall), (0.75, 1.0));
        assert!((m.f2 - 0.9375).abs() < 1e-12);
    }

    #[test]
    fn degenerate_conventions() {
        let no_pred = classification_bundle(ConfusionCounts { tp: 0, fp: 0, fn_: 3, tn: 2 }, 2.0).unwrap();
        assert_eq!((no_pred.precision, no_pred.mcc, no_pred.f2), (0.0, 0.0, 0.0));
        assert!(matches!(
            classification_bundle(ConfusionCounts { tp: 0, fp: 2, fn_: 0, tn: 2 }, 2.0),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn fbeta_limits() {
        let c = ConfusionCounts { tp: 7, fp: 4, fn_: 3, tn: 6 };
        let m1 = classification_bundle(c, 1.0).unwrap();
        assert_eq!(m1.fbeta, m1.f1);
        let big = classification_bundle(c, 100.0).unwrap();
        assert!((big.fbeta - big.recall).abs() < 1e-3);
        assert!((fbeta_counts(7, 4, 3, 1.0) - fbeta_from_pr(7.0 / 11.0, 0.7, 1.0)).abs() < 1e-12);
    }

    #[test]
    fn curve_endpoints_and_monotone_recall() {
        let probs = [0.1, 0.35, 0.4, 0.8, 0.65, 0.2];
        let labels = [0, 1, 0, 1, 1, 0];
        let curve = threshold_curve(&probs, &labels, &uniform_grid(20), 2.0).unwrap();
        assert_eq!(curve[0].recall, 1.0);
        assert_eq!(curve.last().unwrap().recall, 0.0);
        assert!(curve.windows(2).all(|w| w[1].recall <= w[0].recall));
        let single = threshold_curve(&probs, &labels, &[0.4], 2.0).unwrap();
        let direct = classification_bundle(confusion_at(&probs, &labels, 0.4), 2.0).unwrap();
        assert_eq!(single[0].precision, direct.precision);
        assert_eq!(single[0].fbeta, direct.f2);
        assert!(threshold_curve(&probs, &labels, &[0.5, 0.1], 2.0).is_err());
        let mut buf = Vec::new();
        write_curve_csv(&single, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("t,precision,recall,f1,f2\n"));
    }

    proptest! {
        #[test]
        fn auc_matches_pairwise_count(
            data in prop::collection::vec((0u8..20, 0u8..2), 2..120)
        ) {
            let scores: Vec<f64> = data.iter().map(|(s, _)| f64::from(*s) / 7.0).collect();
            let labels: Vec<u8> = data.iter().map(|(_, y)| *y).collect();
            prop_assume!(labels.contains(&0) && labels.contains(&1));
            prop_assert_eq!(roc_auc(&scores, &labels).unwrap(), brute_auc(&scores, &labels));
            let flipped: Vec<u8> = labels.iter().map(|y| 1 - y).collect();
            let sum = roc_auc(&scores, &labels).unwrap() + roc_auc(&scores, &flipped).unwrap();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            let transformed: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 2.0).collect();
            prop_assert_eq!(roc_auc(&transformed, &labels).unwrap(), roc_auc(&scores, &labels).unwrap());
        }
    }
}
