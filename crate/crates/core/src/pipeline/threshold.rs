use crate::error::{Error, Result};
use crate::metrics::fbeta_counts;

/// Threshold maximizing `F_beta` when classifying `prob >= t` as positive.
///
/// Candidates are the distinct probabilities; among tied maximizers the
/// smallest threshold wins. Returns `(t, F_beta(t))`.
pub fn select_threshold_scored(probs: &[f64], labels: &[u8], beta: f64) -> Result<(f64, f64)> {
    if probs.len() != labels.len() {
        return Err(Error::Parameter(format!(
            "{} probabilities for {} labels",
            probs.len(),
            labels.len()
        )));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Parameter(format!("beta must be positive, got {beta}")));
    }
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 {
        return Err(Error::Threshold("no positive labels".into()));
    }
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&i, &j| probs[j].total_cmp(&probs[i]));
    let (mut tp, mut fp) = (0, 0);
    let mut best = (f64::NAN, -1.0);
    let mut i = 0;
    while i < order.len() {
        let t = probs[order[i]];
        while i < order.len() && probs[order[i]] == t {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        // descending sweep: ">=" keeps the later, smaller threshold on ties
        let f = fbeta_counts(tp, fp, positives - tp, beta);
        if f >= best.1 {
            best = (t, f);
        }
    }
    Ok(best)
}

pub fn select_threshold(probs: &[f64], labels: &[u8], beta: f64) -> Result<f64> {
    Ok(select_threshold_scored(probs, labels, beta)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{classification_bundle, confusion_at};
    use proptest::prelude::*;

    #[test]
    fn worked_example() {
        let (t, f) = select_threshold_scored(&[0.2, 0.4, 0.6, 0.8], &[0, 1, 1, 1], 2.0).unwrap();
        assert_eq!((t, f), (0.4, 1.0));
    }

    #[test]
    fn all_positive_gives_minimum() {
        assert_eq!(select_threshold(&[0.7, 0.3, 0.9], &[1, 1, 1], 2.0).unwrap(), 0.3);
        assert!(matches!(select_threshold(&[0.1, 0.2], &[0, 0], 2.0), Err(Error::Threshold(_))));
    }

    #[test]
    fn small_beta_favours_precision() {
        let probs = [0.1, 0.3, 0.5, 0.7, 0.9, 0.95];
        let labels = [1, 0, 1, 0, 1, 1];
        let t = select_threshold(&probs, &labels, 0.01).unwrap();
        let best_precision = probs
            .iter()
            .map(|&c| classification_bundle(confusion_at(&probs, &labels, c), 1.0).unwrap().precision)
            .fold(0.0, f64::max);
        let p = classification_bundle(confusion_at(&probs, &labels, t), 1.0).unwrap().precision;
        assert_eq!(p, best_precision);
    }

    proptest! {
        #[test]
        fn matches_exhaustive_sweep(pairs in prop::collection::vec((0u8..30, 0u8..2), 1..80), beta in 0.2f64..4.0) {
            let probs: Vec<f64> = pairs.iter().map(|p| p.0 as f64 / 30.0).collect();
            let labels: Vec<u8> = pairs.iter().map(|p| p.1).collect();
            prop_assume!(labels.contains(&1));
            let (t, f) = select_threshold_scored(&probs, &labels, beta).unwrap();
            let mut cands = probs.clone();
            cands.sort_by(f64::total_cmp);
            cands.dedup();
            let mut best = (f64::NAN, -1.0);
            for &c in &cands {
                let k = confusion_at(&probs, &labels, c);
                let fb = fbeta_counts(k.tp, k.fp, k.fn_, beta);
                if fb > best.1 + 1e-12 {
                    best = (c, fb);
                }
            }
            prop_assert_eq!(t, best.0);
            prop_assert!((f - best.1).abs() < 1e-12);
        }
    }
}
