use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;

use super::binning::{BinMapper, BinnedMatrix};
use super::config::{Family, Growth, LearnerConfig};
use super::model::TreeEnsembleModel;
use super::tree::{Node, Tree};
use super::{sample_weights, sigmoid};
use crate::error::{Error, Result};
use crate::rng::rng_for;

/// Smallest hessian sum a child may carry.
const MIN_CHILD_HESSIAN: f64 = 1e-3;
const MIN_SPLIT_GAIN: f64 = 1e-12;

/// Gradient, hessian and row count per bin of one feature. The last slot is
/// the missing bin.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureHistogram {
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
    pub count: Vec<usize>,
}

impl FeatureHistogram {
    pub fn zeros(n_slots: usize) -> Self {
        FeatureHistogram {
            grad: vec![0.0; n_slots],
            hess: vec![0.0; n_slots],
            count: vec![0; n_slots],
        }
    }

    /// Accumulate `rows` of a binned column; `n_slots` is the value-bin count
    /// plus one for missing.
    pub fn build(bins: &[u8], rows: &[usize], grad: &[f64], hess: &[f64], n_slots: usize) -> Self {
        let mut h = FeatureHistogram::zeros(n_slots);
        for &r in rows {
            let b = bins[r] as usize;
            h.grad[b] += grad[r];
            h.hess[b] += hess[r];
            h.count[b] += 1;
        }
        h
    }

    fn subtract(&self, other: &FeatureHistogram) -> FeatureHistogram {
        FeatureHistogram {
            grad: self.grad.iter().zip(&other.grad).map(|(a, b)| a - b).collect(),
            hess: self.hess.iter().zip(&other.hess).map(|(a, b)| a - b).collect(),
            count: self.count.iter().zip(&other.count).map(|(a, b)| a - b).collect(),
        }
    }
}

/// L2-regularized second-order gain of splitting a node into two children.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, l2: f64) -> f64 {
    let score = |g: f64, h: f64| g * g / (h + l2);
    0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    /// Rows with bin `<= bin` go left.
    pub bin: usize,
    pub default_left: bool,
    pub gain: f64,
    pub left_count: usize,
    pub right_count: usize,
}

/// Best split of one feature's histogram.
///
/// Thresholds run over every value bin, including the last one, which
/// separates present from missing values. Missing rows are tried on both
/// sides; when there are none, the default direction follows the larger
/// child.
pub fn best_histogram_split(
    hist: &FeatureHistogram,
    feature: usize,
    l2: f64,
    min_samples: usize,
) -> Option<SplitCandidate> {
    let n_value_bins = hist.grad.len() - 1;
    let (mg, mh, mc) = (hist.grad[n_value_bins], hist.hess[n_value_bins], hist.count[n_value_bins]);
    let g_total: f64 = hist.grad[..n_value_bins].iter().sum();
    let h_total: f64 = hist.hess[..n_value_bins].iter().sum();
    let c_total: usize = hist.count[..n_value_bins].iter().sum();
    let mut best: Option<SplitCandidate> = None;
    let (mut gl, mut hl, mut cl) = (0.0, 0.0, 0usize);
    for b in 0..n_value_bins {
        gl += hist.grad[b];
        hl += hist.hess[b];
        cl += hist.count[b];
        let (gr, hr, cr) = (g_total - gl, h_total - hl, c_total - cl);
        let options: &[bool] = if mc == 0 { &[true] } else { &[false, true] };
        for &missing_left in options {
            let (lg, lh, lc, rg, rh, rc) = if missing_left && mc > 0 {
                (gl + mg, hl + mh, cl + mc, gr, hr, cr)
            } else if mc > 0 {
                (gl, hl, cl, gr + mg, hr + mh, cr + mc)
            } else {
                (gl, hl, cl, gr, hr, cr)
            };
            if lc < min_samples || rc < min_samples || lh < MIN_CHILD_HESSIAN || rh < MIN_CHILD_HESSIAN {
                continue;
            }
            let gain = split_gain(lg, lh, rg, rh, l2);
            if gain > MIN_SPLIT_GAIN && best.is_none_or(|c| gain > c.gain) {
                let default_left = if mc > 0 { missing_left } else { lc >= rc };
                best = Some(SplitCandidate {
                    feature,
                    bin: b,
                    default_left,
                    gain,
                    left_count: lc,
                    right_count: rc,
                });
            }
        }
    }
    best
}

struct OpenLeaf {
    node: usize,
    depth: usize,
    rows: Vec<usize>,
    hists: Vec<FeatureHistogram>,
    best: Option<SplitCandidate>,
}

struct TreeBuilder<'a> {
    binned: &'a BinnedMatrix,
    grad: &'a [f64],
    hess: &'a [f64],
    features: &'a [usize],
    config: &'a LearnerConfig,
}

impl TreeBuilder<'_> {
    fn histograms(&self, rows: &[usize]) -> Vec<FeatureHistogram> {
        let n_cols = self.binned.n_cols();
        (0..n_cols)
            .map(|c| {
                let slots = self.binned.missing_bin(c) + 1;
                if self.features.contains(&c) {
                    FeatureHistogram::build(self.binned.column(c), rows, self.grad, self.hess, slots)
                } else {
                    FeatureHistogram::zeros(slots)
                }
            })
            .collect()
    }

    fn best_split(&self, hists: &[FeatureHistogram], depth: usize) -> Option<SplitCandidate> {
        if self.config.max_depth > 0 && depth >= self.config.max_depth {
            return None;
        }
        let mut best: Option<SplitCandidate> = None;
        for &f in self.features {
            if let Some(c) = best_histogram_split(
                &hists[f],
                f,
                self.config.l2_regularization,
                self.config.min_samples_per_leaf,
            ) {
                if best.is_none_or(|b| c.gain > b.gain) {
                    best = Some(c);
                }
            }
        }
        best
    }

    fn leaf(&self, node: usize, depth: usize, rows: Vec<usize>, hists: Vec<FeatureHistogram>) -> OpenLeaf {
        let best = self.best_split(&hists, depth);
        OpenLeaf {
            node,
            depth,
            rows,
            hists,
            best,
        }
    }

    fn grow(&self, rows: Vec<usize>) -> Tree {
        let mut nodes = vec![Node::Leaf {
            value: 0.0,
            cover: rows.len() as f64,
        }];
        let root_hists = self.histograms(&rows);
        let mut open = vec![self.leaf(0, 0, rows, root_hists)];
        let mut n_leaves = 1;
        while n_leaves < self.config.leaf_limit {
            let pick = open
                .iter()
                .enumerate()
                .filter(|(_, l)| l.best.is_some())
                .min_by(|(_, a), (_, b)| match self.config.growth {
                    Growth::Leafwise => {
                        let (ga, gb) = (a.best.unwrap().gain, b.best.unwrap().gain);
                        gb.total_cmp(&ga).then(a.node.cmp(&b.node))
                    }
                    Growth::Depthwise => a.depth.cmp(&b.depth).then(a.node.cmp(&b.node)),
                })
                .map(|(i, _)| i);
            let Some(i) = pick else { break };
            let leaf = open.swap_remove(i);
            let split = leaf.best.unwrap();
            let bins = self.binned.column(split.feature);
            let missing = self.binned.missing_bin(split.feature);
            let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = leaf.rows.iter().partition(|&&r| {
                let b = bins[r] as usize;
                if b == missing {
                    split.default_left
                } else {
                    b <= split.bin
                }
            });
            let (small, large_is_left) = if left_rows.len() <= right_rows.len() {
                (&left_rows, false)
            } else {
                (&right_rows, true)
            };
            let small_hists = self.histograms(small);
            let large_hists: Vec<FeatureHistogram> = leaf
                .hists
                .iter()
                .zip(&small_hists)
                .map(|(p, s)| p.subtract(s))
                .collect();
            let (left_hists, right_hists) = if large_is_left {
                (large_hists, small_hists)
            } else {
                (small_hists, large_hists)
            };
            let left_id = nodes.len();
            let right_id = left_id + 1;
            nodes.push(Node::Leaf {
                value: 0.0,
                cover: left_rows.len() as f64,
            });
            nodes.push(Node::Leaf {
                value: 0.0,
                cover: right_rows.len() as f64,
            });
            nodes[leaf.node] = Node::Split {
                feature: split.feature,
                threshold: self.binned.mapper().threshold(split.feature, split.bin),
                default_left: split.default_left,
                left: left_id,
                right: right_id,
                cover: leaf.rows.len() as f64,
                gain: split.gain,
            };
            open.push(self.leaf(left_id, leaf.depth + 1, left_rows, left_hists));
            open.push(self.leaf(right_id, leaf.depth + 1, right_rows, right_hists));
            n_leaves += 1;
        }
        let l2 = self.config.l2_regularization;
        for leaf in open {
            let g: f64 = leaf.rows.iter().map(|&r| self.grad[r]).sum();
            let h: f64 = leaf.rows.iter().map(|&r| self.hess[r]).sum();
            nodes[leaf.node] = Node::Leaf {
                value: -g / (h + l2) * self.config.learning_rate,
                cover: leaf.rows.len() as f64,
            };
        }
        Tree { nodes }
    }
}

/// Route a binned row through a tree grown on the same bin mapper.
fn predict_binned(tree: &Tree, binned: &BinnedMatrix, row: usize) -> f64 {
    let mapper: &BinMapper = binned.mapper();
    let mut node = 0;
    loop {
        match &tree.nodes[node] {
            Node::Leaf { value, .. } => return *value,
            Node::Split {
                feature,
                threshold,
                default_left,
                left,
                right,
                ..
            } => {
                let b = binned.bin(row, *feature);
                let go_left = if b == binned.missing_bin(*feature) {
                    *default_left
                } else {
                    mapper.threshold(*feature, b) <= *threshold
                };
                node = if go_left { *left } else { *right };
            }
        }
    }
}

fn log_loss(margin: f64, y: u8) -> f64 {
    // log(1 + e^m) - y*m, computed stably
    let softplus = if margin > 0.0 {
        margin + (-margin).exp().ln_1p()
    } else {
        margin.exp().ln_1p()
    };
    softplus - f64::from(y) * margin
}

fn subsample(rng: &mut ChaCha8Rng, n: usize, rate: f64) -> Vec<usize> {
    if rate >= 1.0 {
        return (0..n).collect();
    }
    let m = ((n as f64 * rate).round() as usize).clamp(1, n);
    let mut idx = sample(rng, n, m).into_vec();
    idx.sort_unstable();
    idx
}

/// Histogram gradient boosting on the binary logistic loss.
///
/// Positives carry the resolved class weight. When `early_stopping_rounds`
/// is positive, boosting stops once the class-weighted validation log-loss
/// has not improved for that many rounds and the ensemble is truncated to its
/// best iteration.
pub fn fit_gbdt(
    binned: &BinnedMatrix,
    labels: &[u8],
    config: &LearnerConfig,
    valid: Option<(&BinnedMatrix, &[u8])>,
) -> Result<TreeEnsembleModel> {
    config.validate()?;
    let n = binned.n_rows();
    if labels.len() != n {
        return Err(Error::Parameter(format!("{} labels for {n} rows", labels.len())));
    }
    if config.early_stopping_rounds > 0 && valid.is_none() {
        return Err(Error::Parameter(
            "early stopping requires a validation set".into(),
        ));
    }
    if let Some((vb, vy)) = valid {
        if vb.mapper() != binned.mapper() || vy.len() != vb.n_rows() {
            return Err(Error::Parameter("validation set must share the training bins".into()));
        }
    }
    let (weights, class_weight) = sample_weights(labels, config.positive_class_weight)?;
    let w_pos: f64 = weights.iter().zip(labels).filter(|(_, &y)| y == 1).map(|(w, _)| w).sum();
    let w_neg: f64 = weights.iter().zip(labels).filter(|(_, &y)| y == 0).map(|(w, _)| w).sum();
    let w_total = w_pos + w_neg;
    let base_score = (w_pos / w_neg).ln();

    let mut rng = rng_for(config.seed, "gbdt", 0);
    let mut margin = vec![base_score; n];
    let mut valid_margin = valid.map(|(vb, _)| vec![base_score; vb.n_rows()]);
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let train_loss_now = |margin: &[f64]| -> f64 {
        margin
            .iter()
            .zip(labels)
            .zip(&weights)
            .map(|((&m, &y), w)| w * log_loss(m, y))
            .sum::<f64>()
            / w_total
    };
    let valid_loss_now = |vm: &[f64], vy: &[u8]| -> f64 {
        let w = |y: u8| if y == 1 { class_weight } else { 1.0 };
        let total: f64 = vy.iter().map(|&y| w(y)).sum();
        vm.iter().zip(vy).map(|(&m, &y)| w(y) * log_loss(m, y)).sum::<f64>() / total.max(f64::MIN_POSITIVE)
    };
    let mut train_loss = vec![train_loss_now(&margin)];
    let mut valid_loss = Vec::new();
    let mut trees = Vec::new();
    let mut best_iteration = 0;
    let mut best_valid = f64::INFINITY;
    let n_cols = binned.n_cols();

    for iter in 1..=config.iteration_cap {
        for r in 0..n {
            let p = sigmoid(margin[r]);
            grad[r] = weights[r] * (p - f64::from(labels[r]));
            hess[r] = (weights[r] * p * (1.0 - p)).max(1e-16);
        }
        let rows = subsample(&mut rng, n, config.row_subsample);
        let features = subsample(&mut rng, n_cols, config.column_subsample);
        let builder = TreeBuilder {
            binned,
            grad: &grad,
            hess: &hess,
            features: &features,
            config,
        };
        let tree = builder.grow(rows);
        for (r, m) in margin.iter_mut().enumerate() {
            *m += predict_binned(&tree, binned, r);
        }
        train_loss.push(train_loss_now(&margin));
        trees.push(tree);
        match (valid, valid_margin.as_mut()) {
            (Some((vb, vy)), Some(vm)) => {
                let tree = trees.last().unwrap();
                for (r, m) in vm.iter_mut().enumerate() {
                    *m += predict_binned(tree, vb, r);
                }
                let loss = valid_loss_now(vm, vy);
                valid_loss.push(loss);
                if loss < best_valid {
                    best_valid = loss;
                    best_iteration = iter;
                }
                if config.early_stopping_rounds > 0 && iter - best_iteration >= config.early_stopping_rounds {
                    break;
                }
            }
            _ => best_iteration = iter,
        }
    }
    if config.early_stopping_rounds == 0 {
        best_iteration = trees.len();
    }
    trees.truncate(best_iteration);
    Ok(TreeEnsembleModel {
        family: Family::HistGbdt,
        trees,
        base_score,
        best_iteration,
        bin_edges: binned.mapper().edges.clone(),
        feature_names: binned.mapper().feature_names.clone(),
        config: config.clone(),
        resolved_class_weight: class_weight,
        train_loss,
        valid_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::roc_auc;
    use crate::records::{Column, FeatureMatrix};
    use crate::trees::binning::bin_features;
    use crate::trees::model::predict_ensemble;
    use proptest::prelude::*;
    use rand::Rng;

    fn matrix(cols: usize, rows: &[Vec<Option<f64>>]) -> FeatureMatrix {
        let columns = (0..cols).map(|c| Column::new(format!("f{c}"))).collect();
        let ids = (0..rows.len()).map(|i| format!("r{i}")).collect();
        FeatureMatrix::from_rows(columns, ids, rows).unwrap()
    }

    fn quick(cap: usize) -> LearnerConfig {
        LearnerConfig {
            iteration_cap: cap,
            early_stopping_rounds: 0,
            min_samples_per_leaf: 1,
            row_subsample: 1.0,
            column_subsample: 1.0,
            ..LearnerConfig::default()
        }
    }

    /// Exhaustive split search on raw values: every cut between consecutive
    /// distinct values, plus present-vs-missing, with missing rows on each side.
    fn raw_best_gain(values: &[Option<f64>], g: &[f64], h: &[f64], l2: f64, min_samples: usize) -> f64 {
        let mut present: Vec<f64> = values.iter().flatten().copied().collect();
        present.sort_by(f64::total_cmp);
        present.dedup();
        let mut best = 0.0f64;
        for &cut in &present {
            for missing_left in [false, true] {
                let (mut gl, mut hl, mut cl, mut gr, mut hr, mut cr) = (0.0, 0.0, 0, 0.0, 0.0, 0);
                for (i, v) in values.iter().enumerate() {
                    let left = match v {
                        Some(x) => *x <= cut,
                        None => missing_left,
                    };
                    if left {
                        gl += g[i];
                        hl += h[i];
                        cl += 1;
                    } else {
                        gr += g[i];
                        hr += h[i];
                        cr += 1;
                    }
                }
                if cl < min_samples || cr < min_samples || hl < MIN_CHILD_HESSIAN || hr < MIN_CHILD_HESSIAN {
                    continue;
                }
                let gain = split_gain(gl, hl, gr, hr, l2);
                if gain > MIN_SPLIT_GAIN {
                    best = best.max(gain);
                }
            }
        }
        best
    }

    proptest! {
        #[test]
        fn histogram_gain_matches_raw_gain(
            cells in prop::collection::vec(prop::option::weighted(0.85, -5i32..40), 2..200),
            seed in any::<u64>(),
            min_samples in 1usize..4,
        ) {
            let values: Vec<Option<f64>> = cells.iter().map(|c| c.map(|v| v as f64 * 0.25)).collect();
            let mut rng = rng_for(seed, "oracle", 0);
            let g: Vec<f64> = values.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
            let h: Vec<f64> = values.iter().map(|_| rng.random_range(0.01..0.25)).collect();
            let rows: Vec<Vec<Option<f64>>> = values.iter().map(|v| vec![*v]).collect();
            let binned = bin_features(&matrix(1, &rows), 256).unwrap();
            let all: Vec<usize> = (0..values.len()).collect();
            let hist = FeatureHistogram::build(binned.column(0), &all, &g, &h, binned.missing_bin(0) + 1);
            let hist_gain = best_histogram_split(&hist, 0, 1.0, min_samples).map_or(0.0, |c| c.gain);
            let raw_gain = raw_best_gain(&values, &g, &h, 1.0, min_samples);
            prop_assert!((hist_gain - raw_gain).abs() <= 1e-9, "hist {} raw {}", hist_gain, raw_gain);
        }
    }

    fn noisy_data(n: usize, seed: u64) -> (FeatureMatrix, Vec<u8>) {
        let mut rng = rng_for(seed, "data", 0);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let x0: f64 = rng.random_range(-2.0..2.0);
            let x1: f64 = rng.random_range(-2.0..2.0);
            let p = sigmoid(1.5 * x0 - x1);
            labels.push(u8::from(rng.random::<f64>() < p));
            let x1_cell = if rng.random::<f64>() < 0.1 { None } else { Some(x1) };
            rows.push(vec![Some(x0), x1_cell, Some(rng.random_range(0.0..1.0))]);
        }
        (matrix(3, &rows), labels)
    }

    #[test]
    fn separable_feature_gives_perfect_auc() {
        let rows: Vec<Vec<Option<f64>>> = (0..100).map(|i| vec![Some(i as f64)]).collect();
        let labels: Vec<u8> = (0..100).map(|i| u8::from(i >= 50)).collect();
        let m = matrix(1, &rows);
        let binned = bin_features(&m, 256).unwrap();
        let model = fit_gbdt(&binned, &labels, &quick(20), None).unwrap();
        let p = predict_ensemble(&model, &m).unwrap();
        assert_eq!(roc_auc(&p, &labels).unwrap(), 1.0);
    }

    #[test]
    fn iteration_cap_one() {
        let (m, y) = noisy_data(200, 1);
        let binned = bin_features(&m, 64).unwrap();
        let model = fit_gbdt(&binned, &y, &quick(1), None).unwrap();
        assert_eq!((model.trees.len(), model.best_iteration), (1, 1));
    }

    #[test]
    fn precondition_errors() {
        let (m, y) = noisy_data(50, 2);
        let binned = bin_features(&m, 64).unwrap();
        assert!(matches!(fit_gbdt(&binned, &vec![1; 50], &quick(5), None), Err(Error::Fit(_))));
        let es = LearnerConfig {
            early_stopping_rounds: 5,
            ..quick(5)
        };
        assert!(matches!(fit_gbdt(&binned, &y, &es, None), Err(Error::Parameter(_))));
    }

    #[test]
    fn training_loss_never_increases() {
        for growth in [Growth::Leafwise, Growth::Depthwise] {
            let (m, y) = noisy_data(400, 3);
            let binned = bin_features(&m, 32).unwrap();
            let cfg = LearnerConfig {
                growth,
                min_samples_per_leaf: 5,
                ..quick(150)
            };
            let model = fit_gbdt(&binned, &y, &cfg, None).unwrap();
            assert_eq!(model.train_loss.len(), 151);
            for w in model.train_loss.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn auto_weight_balances_prior() {
        let (m, y) = noisy_data(300, 4);
        let binned = bin_features(&m, 32).unwrap();
        let model = fit_gbdt(&binned, &y, &quick(1), None).unwrap();
        assert!(model.base_score.abs() < 1e-12);
        let empty = TreeEnsembleModel {
            trees: Vec::new(),
            best_iteration: 0,
            ..model
        };
        assert!(predict_ensemble(&empty, &m).unwrap().iter().all(|&p| (p - 0.5).abs() < 1e-12));
    }

    #[test]
    fn missing_routing_matches_training_partition() {
        let (m, y) = noisy_data(300, 5);
        let binned = bin_features(&m, 32).unwrap();
        let cfg = LearnerConfig {
            min_samples_per_leaf: 5,
            ..quick(30)
        };
        let model = fit_gbdt(&binned, &y, &cfg, None).unwrap();
        for tree in &model.trees {
            for r in 0..m.n_rows() {
                let raw = tree.predict(|c| m.get(r, c));
                assert_eq!(raw.to_bits(), predict_binned(tree, &binned, r).to_bits());
            }
        }
    }

    #[test]
    fn early_stopping_truncates_to_best_iteration() {
        let (m, y) = noisy_data(400, 6);
        let (vm, vy) = noisy_data(150, 7);
        let mapper = BinMapper::fit(&m, 64).unwrap();
        let (b, vb) = (mapper.transform(&m).unwrap(), mapper.transform(&vm).unwrap());
        let cfg = LearnerConfig {
            early_stopping_rounds: 10,
            learning_rate: 0.3,
            ..quick(500)
        };
        let model = fit_gbdt(&b, &y, &cfg, Some((&vb, &vy))).unwrap();
        assert_eq!(model.trees.len(), model.best_iteration);
        assert!(model.valid_loss.len() < 500);
        assert_eq!(model.valid_loss.len(), model.best_iteration + 10);
        let best = model.valid_loss.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(model.valid_loss[model.best_iteration - 1], best);
    }

    #[test]
    fn deterministic_with_subsampling() {
        let (m, y) = noisy_data(300, 8);
        let binned = bin_features(&m, 32).unwrap();
        let cfg = LearnerConfig {
            iteration_cap: 40,
            early_stopping_rounds: 0,
            seed: 11,
            ..LearnerConfig::default()
        };
        let a = fit_gbdt(&binned, &y, &cfg, None).unwrap();
        let b = fit_gbdt(&binned, &y, &cfg, None).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let other = fit_gbdt(&binned, &y, &LearnerConfig { seed: 12, ..cfg }, None).unwrap();
        assert_ne!(a.trees, other.trees);
    }

    #[test]
    fn growth_policies_respect_limits() {
        let (m, y) = noisy_data(500, 9);
        let binned = bin_features(&m, 64).unwrap();
        for (growth, depth, leaves) in [(Growth::Leafwise, 0, 7), (Growth::Depthwise, 2, 31)] {
            let cfg = LearnerConfig {
                growth,
                max_depth: depth,
                leaf_limit: leaves,
                ..quick(5)
            };
            let model = fit_gbdt(&binned, &y, &cfg, None).unwrap();
            for t in &model.trees {
                assert!(t.n_leaves() <= leaves);
                if depth > 0 {
                    assert!(t.depth() <= depth);
                }
            }
        }
    }
}
