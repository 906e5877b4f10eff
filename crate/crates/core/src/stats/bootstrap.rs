use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{average_precision, roc_auc};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaMetric {
    RocAuc,
    AveragePrecision,
}

impl DeltaMetric {
    pub const ALL: [DeltaMetric; 2] = [DeltaMetric::RocAuc, DeltaMetric::AveragePrecision];

    pub fn as_str(self) -> &'static str {
        match self {
            DeltaMetric::RocAuc => "roc_auc",
            DeltaMetric::AveragePrecision => "average_precision",
        }
    }

    pub fn parse(raw: &str) -> Option<Self> {
        match raw {
            "roc_auc" | "auc" => Some(DeltaMetric::RocAuc),
            "average_precision" | "pr_auc" | "ap" => Some(DeltaMetric::AveragePrecision),
            _ => None,
        }
    }

    pub fn evaluate(self, scores: &[f64], labels: &[u8]) -> Result<f64> {
        match self {
            DeltaMetric::RocAuc => roc_auc(scores, labels),
            DeltaMetric::AveragePrecision => average_precision(scores, labels),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaResult {
    pub metric: DeltaMetric,
    /// Candidate minus reference.
    pub delta: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: f64,
    pub q_value: Option<f64>,
    pub n_boot: usize,
    pub seed: u64,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Stratified paired bootstrap of `metric(cand) - metric(ref)`.
///
/// Replicates resample rows with replacement inside every (fold, class)
/// stratum and apply the same indices to both score vectors. Replicate `b`
/// draws from stream `b` of a generator keyed on `(seed, metric)`, so results
/// do not depend on thread scheduling or on which models are compared.
pub fn paired_bootstrap_delta(
    ref_scores: &[f64],
    cand_scores: &[f64],
    labels: &[u8],
    fold_ids: &[usize],
    metric: DeltaMetric,
    n_boot: usize,
    seed: u64,
) -> Result<DeltaResult> {
    let n = labels.len();
    if ref_scores.len() != n || cand_scores.len() != n || fold_ids.len() != n {
        return Err(Error::Pairing(format!(
            "length mismatch: ref {}, cand {}, labels {n}, folds {}",
            ref_scores.len(),
            cand_scores.len(),
            fold_ids.len()
        )));
    }
    if n_boot == 0 {
        return Err(Error::Parameter("n_boot must be positive".into()));
    }
    let mut strata: BTreeMap<(usize, u8), Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        strata.entry((fold_ids[i], labels[i])).or_default().push(i);
    }
    let folds: std::collections::BTreeSet<usize> = fold_ids.iter().copied().collect();
    for f in &folds {
        if !strata.contains_key(&(*f, 0)) || !strata.contains_key(&(*f, 1)) {
            return Err(Error::Stratification(format!("fold {f} lacks one class")));
        }
    }
    let delta = metric.evaluate(cand_scores, labels)? - metric.evaluate(ref_scores, labels)?;
    let strata: Vec<Vec<usize>> = strata.into_values().collect();
    let base_seed = derive_seed(seed, metric.as_str(), 0);
    let cap = 10 * n_boot;

    let replicates: Vec<(f64, usize)> = (0..n_boot)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
            rng.set_stream(b as u64);
            let mut rs = Vec::with_capacity(n);
            let mut cs = Vec::with_capacity(n);
            let mut ys = Vec::with_capacity(n);
            let mut attempts = 0;
            loop {
                attempts += 1;
                rs.clear();
                cs.clear();
                ys.clear();
                for members in &strata {
                    for _ in 0..members.len() {
                        let i = members[rng.random_range(0..members.len())];
                        rs.push(ref_scores[i]);
                        cs.push(cand_scores[i]);
                        ys.push(labels[i]);
                    }
                }
                match (metric.evaluate(&cs, &ys), metric.evaluate(&rs, &ys)) {
                    (Ok(c), Ok(r)) => return (c - r, attempts),
                    _ if attempts >= cap => return (f64::NAN, attempts),
                    _ => continue,
                }
            }
        })
        .collect();

    let total_attempts: usize = replicates.iter().map(|r| r.1).sum();
    if total_attempts > cap || replicates.iter().any(|r| r.0.is_nan()) {
        return Err(Error::UndefinedMetric(format!(
            "bootstrap needed more than {cap} draws to obtain {n_boot} defined replicates"
        )));
    }
    let mut deltas: Vec<f64> = replicates.into_iter().map(|r| r.0).collect();
    deltas.sort_by(f64::total_cmp);
    let le = deltas.iter().filter(|&&d| d <= 0.0).count();
    let ge = deltas.iter().filter(|&&d| d >= 0.0).count();
    let smooth = |count: usize| (count + 1) as f64 / (n_boot + 1) as f64;
    let p_value = (2.0 * smooth(le).min(smooth(ge))).min(1.0);
    Ok(DeltaResult {
        metric,
        delta,
        ci_low: percentile(&deltas, 0.025),
        ci_high: percentile(&deltas, 0.975),
        p_value,
        q_value: None,
        n_boot,
        seed,
    })
}
