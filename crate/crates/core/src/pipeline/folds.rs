use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::records::stratified_split;
use crate::rng::{derive_seed, rng_for};

/// Stratified k-fold assignment plus a stratified inner split of every
/// fold's training portion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub fold_of: Vec<usize>,
    /// Per fold: (inner_train, inner_valid), both sorted row indices.
    pub inner_split: Vec<(Vec<usize>, Vec<usize>)>,
    pub inner_fraction: f64,
    pub seed: u64,
}

impl FoldPlan {
    pub fn n_rows(&self) -> usize {
        self.fold_of.len()
    }

    pub fn held_out(&self, fold: usize) -> Vec<usize> {
        (0..self.n_rows()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn training(&self, fold: usize) -> Vec<usize> {
        (0..self.n_rows()).filter(|&i| self.fold_of[i] != fold).collect()
    }
}

/// Seeded stratified k-fold plan.
///
/// Each class is shuffled and dealt round-robin over the folds, the deal
/// continuing from one class to the next so fold sizes differ by at most
/// one. `inner_fraction` of every training portion becomes inner-train.
pub fn plan_folds(labels: &[u8], k: usize, inner_fraction: f64, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Parameter(format!("k must be at least 2, got {k}")));
    }
    if !(inner_fraction > 0.0 && inner_fraction < 1.0) {
        return Err(Error::Parameter(format!(
            "inner_fraction must lie in (0, 1), got {inner_fraction}"
        )));
    }
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &y) in labels.iter().enumerate() {
        match y {
            0 | 1 => by_class[y as usize].push(i),
            other => return Err(Error::Parameter(format!("label {other} at row {i} is not 0/1"))),
        }
    }
    for (class, members) in by_class.iter().enumerate() {
        if members.len() < k {
            return Err(Error::Stratification(format!(
                "class {class} has {} rows, fewer than k = {k}",
                members.len()
            )));
        }
    }
    let mut fold_of = vec![0; labels.len()];
    let mut position = 0;
    for (class, members) in by_class.iter_mut().enumerate() {
        members.shuffle(&mut rng_for(seed, "folds", class as u64));
        for &i in members.iter() {
            fold_of[i] = position % k;
            position += 1;
        }
    }
    let mut inner_split = Vec::with_capacity(k);
    for f in 0..k {
        let training: Vec<usize> = (0..labels.len()).filter(|&i| fold_of[i] != f).collect();
        let sub: Vec<u8> = training.iter().map(|&i| labels[i]).collect();
        let (tr, va) = stratified_split(&sub, 1.0 - inner_fraction, derive_seed(seed, "inner_split", f as u64))
            .map_err(|e| e.in_fold(f))?;
        inner_split.push((
            tr.iter().map(|&j| training[j]).collect(),
            va.iter().map(|&j| training[j]).collect(),
        ));
    }
    Ok(FoldPlan {
        k,
        fold_of,
        inner_split,
        inner_fraction,
        seed,
    })
}
