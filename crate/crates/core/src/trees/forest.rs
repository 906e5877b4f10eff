use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;

use super::config::{Family, LearnerConfig};
use super::model::TreeEnsembleModel;
use super::sample_weights;
use super::tree::{Node, Tree};
use crate::error::{Error, Result};
use crate::records::FeatureMatrix;
use crate::rng::rng_for;

/// Sum over children of `(wp^2 + wn^2) / w`; maximizing it minimizes the
/// weighted Gini impurity of the children.
fn purity(wp: f64, wn: f64) -> f64 {
    let w = wp + wn;
    if w > 0.0 {
        (wp * wp + wn * wn) / w
    } else {
        0.0
    }
}

struct Split {
    feature: usize,
    threshold: f64,
    default_left: bool,
    score: f64,
}

struct Grower<'a> {
    matrix: &'a FeatureMatrix,
    labels: &'a [u8],
    weights: &'a [f64],
    config: &'a LearnerConfig,
    n_try: usize,
}

impl Grower<'_> {
    fn class_weights(&self, rows: &[usize]) -> (f64, f64) {
        rows.iter().fold((0.0, 0.0), |(p, n), &r| {
            if self.labels[r] == 1 {
                (p + self.weights[r], n)
            } else {
                (p, n + self.weights[r])
            }
        })
    }

    fn best_split(&self, rows: &[usize], features: &[usize]) -> Option<Split> {
        let (wp, wn) = self.class_weights(rows);
        let base = purity(wp, wn);
        let min = self.config.min_samples_per_leaf;
        let mut best: Option<Split> = None;
        for &f in features {
            let mut present: Vec<(f64, usize)> = Vec::with_capacity(rows.len());
            let mut missing: Vec<usize> = Vec::new();
            for &r in rows {
                match self.matrix.get(r, f) {
                    Some(v) => present.push((v, r)),
                    None => missing.push(r),
                }
            }
            present.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (mp, mn) = self.class_weights(&missing);
            let mc = missing.len();
            let (mut lp, mut ln) = (0.0, 0.0);
            for i in 0..present.len() {
                let r = present[i].1;
                if self.labels[r] == 1 {
                    lp += self.weights[r];
                } else {
                    ln += self.weights[r];
                }
                let last = i + 1 == present.len();
                if !last && present[i + 1].0 == present[i].0 {
                    continue;
                }
                if last && mc == 0 {
                    break;
                }
                let threshold = if last {
                    f64::MAX
                } else {
                    let (a, b) = (present[i].0, present[i + 1].0);
                    let mid = a + (b - a) / 2.0;
                    if mid < b {
                        mid
                    } else {
                        a
                    }
                };
                let lc = i + 1;
                let rc = present.len() - lc;
                let (rp, rn) = (wp - mp - lp, wn - mn - ln);
                let options: &[bool] = if mc == 0 { &[true] } else { &[false, true] };
                for &missing_left in options {
                    let (l_count, r_count, score) = if missing_left && mc > 0 {
                        (lc + mc, rc, purity(lp + mp, ln + mn) + purity(rp, rn))
                    } else if mc > 0 {
                        (lc, rc + mc, purity(lp, ln) + purity(rp + mp, rn + mn))
                    } else {
                        (lc, rc, purity(lp, ln) + purity(rp, rn))
                    };
                    if l_count < min || r_count < min || score - base <= 1e-12 {
                        continue;
                    }
                    if best.as_ref().is_none_or(|b| score > b.score) {
                        let default_left = if mc > 0 { missing_left } else { l_count >= r_count };
                        best = Some(Split {
                            feature: f,
                            threshold,
                            default_left,
                            score,
                        });
                    }
                }
            }
        }
        best
    }

    fn grow(&self, rows: Vec<usize>, seed: u64, tree_index: u64) -> Tree {
        let mut rng = rng_for(seed, "forest_split", tree_index);
        let n_cols = self.matrix.n_cols();
        let mut nodes = vec![Node::Leaf { value: 0.0, cover: 0.0 }];
        let mut stack = vec![(0usize, 0usize, rows)];
        while let Some((node, depth, rows)) = stack.pop() {
            let (wp, wn) = self.class_weights(&rows);
            let leaf = Node::Leaf {
                value: if wp + wn > 0.0 { wp / (wp + wn) } else { 0.0 },
                cover: rows.len() as f64,
            };
            let depth_ok = self.config.max_depth == 0 || depth < self.config.max_depth;
            if !depth_ok || wp == 0.0 || wn == 0.0 || rows.len() < 2 * self.config.min_samples_per_leaf {
                nodes[node] = leaf;
                continue;
            }
            let mut features = sample(&mut rng, n_cols, self.n_try).into_vec();
            features.sort_unstable();
            let Some(split) = self.best_split(&rows, &features) else {
                nodes[node] = leaf;
                continue;
            };
            let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&r| match self.matrix.get(r, split.feature) {
                    Some(v) => v <= split.threshold,
                    None => split.default_left,
                });
            let left = nodes.len();
            nodes.push(Node::Leaf { value: 0.0, cover: 0.0 });
            nodes.push(Node::Leaf { value: 0.0, cover: 0.0 });
            nodes[node] = Node::Split {
                feature: split.feature,
                threshold: split.threshold,
                default_left: split.default_left,
                left,
                right: left + 1,
                cover: rows.len() as f64,
                gain: split.score - purity(wp, wn),
            };
            stack.push((left + 1, depth + 1, right_rows));
            stack.push((left, depth + 1, left_rows));
        }
        Tree { nodes }
    }
}

/// Random forest of Gini trees on raw feature values.
///
/// Each tree sees a bootstrap sample (or a subsample without replacement
/// when `bootstrap` is off and `row_subsample < 1`) and draws
/// `ceil(column_subsample * n_cols)` candidate features at every split.
/// Leaves hold the class-weighted positive fraction; the forest averages
/// them. `leaf_limit` and early stopping do not apply.
pub fn fit_forest(matrix: &FeatureMatrix, labels: &[u8], config: &LearnerConfig) -> Result<TreeEnsembleModel> {
    config.validate()?;
    let n = matrix.n_rows();
    if labels.len() != n {
        return Err(Error::Parameter(format!("{} labels for {n} rows", labels.len())));
    }
    if matrix.n_cols() == 0 {
        return Err(Error::EmptyInput("no feature columns".into()));
    }
    let (weights, class_weight) = sample_weights(labels, config.positive_class_weight)?;
    let n_try = ((config.column_subsample * matrix.n_cols() as f64).ceil() as usize).clamp(1, matrix.n_cols());
    let grower = Grower {
        matrix,
        labels,
        weights: &weights,
        config,
        n_try,
    };
    let m = ((n as f64 * config.row_subsample).round() as usize).clamp(1, n);
    let trees: Vec<Tree> = (0..config.iteration_cap)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(config.seed, "forest_rows", t as u64);
            let rows: Vec<usize> = if config.bootstrap {
                (0..m).map(|_| rng.random_range(0..n)).collect()
            } else if m < n {
                let mut idx = sample(&mut rng, n, m).into_vec();
                idx.sort_unstable();
                idx
            } else {
                (0..n).collect()
            };
            grower.grow(rows, config.seed, t as u64)
        })
        .collect();
    Ok(TreeEnsembleModel {
        family: Family::RandomForest,
        best_iteration: trees.len(),
        trees,
        base_score: 0.0,
        bin_edges: Vec::new(),
        feature_names: matrix.column_names(),
        config: config.clone(),
        resolved_class_weight: class_weight,
        train_loss: Vec::new(),
        valid_loss: Vec::new(),
    })
}
