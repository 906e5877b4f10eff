//! Exact path-dependent Shapley attributions for tree ensembles.
//!
//! Conditional expectations follow the training cover stored at every node:
//! when a feature is unknown, a split averages its children weighted by
//! `child.cover / node.cover`. Attributions are on the raw-score scale
//! (log-odds for boosting, mean leaf value for a forest).

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::records::FeatureMatrix;
use crate::trees::{Family, Model, Node, Tree, TreeEnsembleModel};

/// Largest feature count `brute_force_shap` accepts.
pub const ORACLE_FEATURE_LIMIT: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapAttribution {
    pub row_id: String,
    /// Expected raw score with no feature known.
    pub base_value: f64,
    /// One value per model feature, in model feature order.
    pub values: Vec<f64>,
}

impl ShapAttribution {
    /// `base_value` plus every contribution.
    pub fn total(&self) -> f64 {
        self.base_value + self.values.iter().sum::<f64>()
    }
}

/// The ensemble inside a model; the logistic baseline has no attributions.
pub fn ensemble(model: &Model) -> Result<&TreeEnsembleModel> {
    match model {
        Model::Ensemble(m) => Ok(m),
        Model::Logistic(_) => Err(Error::UnsupportedModel(
            "attributions are defined for tree ensembles only".into(),
        )),
    }
}

fn check_covers(model: &TreeEnsembleModel) -> Result<()> {
    for (t, tree) in model.trees.iter().enumerate() {
        for (i, node) in tree.nodes.iter().enumerate() {
            if let Node::Split { cover, left, right, .. } = node {
                let children = [tree.nodes[*left].cover(), tree.nodes[*right].cover()];
                if !(*cover > 0.0) || children.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
                    return Err(Error::UnsupportedModel(format!(
                        "tree {t} node {i} lacks usable cover weights"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Per-tree scale and the constant added to the tree sum.
fn combination(model: &TreeEnsembleModel) -> (f64, f64) {
    match model.family {
        Family::RandomForest if model.trees.is_empty() => (0.0, 0.5),
        Family::RandomForest => (1.0 / model.trees.len() as f64, 0.0),
        _ => (1.0, model.base_score),
    }
}

/// Expected tree output when only the features in `known` are observed.
fn conditional_expectation(tree: &Tree, node: usize, row: &[Option<f64>], known: &dyn Fn(usize) -> bool) -> f64 {
    match &tree.nodes[node] {
        Node::Leaf { value, .. } => *value,
        Node::Split { feature, left, right, cover, .. } => {
            if known(*feature) {
                conditional_expectation(tree, tree.route(node, row[*feature]), row, known)
            } else {
                let wl = tree.nodes[*left].cover() / cover;
                let wr = tree.nodes[*right].cover() / cover;
                wl * conditional_expectation(tree, *left, row, known)
                    + wr * conditional_expectation(tree, *right, row, known)
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct PathElement {
    feature: Option<usize>,
    zero_fraction: f64,
    one_fraction: f64,
    weight: f64,
}

fn extend_path(path: &mut Vec<PathElement>, zero_fraction: f64, one_fraction: f64, feature: Option<usize>) {
    let depth = path.len();
    path.push(PathElement {
        feature,
        zero_fraction,
        one_fraction,
        weight: if depth == 0 { 1.0 } else { 0.0 },
    });
    let d = depth as f64;
    for i in (0..depth).rev() {
        let fi = i as f64;
        path[i + 1].weight += one_fraction * path[i].weight * (fi + 1.0) / (d + 1.0);
        path[i].weight = zero_fraction * path[i].weight * (d - fi) / (d + 1.0);
    }
}

fn unwind_path(path: &mut Vec<PathElement>, index: usize) {
    let depth = path.len() - 1;
    let d = depth as f64;
    let PathElement { zero_fraction, one_fraction, .. } = path[index];
    let mut next_one = path[depth].weight;
    for i in (0..depth).rev() {
        let fi = i as f64;
        if one_fraction != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next_one * (d + 1.0) / ((fi + 1.0) * one_fraction);
            next_one = tmp - path[i].weight * zero_fraction * (d - fi) / (d + 1.0);
        } else {
            path[i].weight = path[i].weight * (d + 1.0) / (zero_fraction * (d - fi));
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
    path.pop();
}

/// Total path weight with element `index` removed, without modifying the
/// path.
fn unwound_sum(path: &[PathElement], index: usize) -> f64 {
    let depth = path.len() - 1;
    let d = depth as f64;
    let PathElement { zero_fraction, one_fraction, .. } = path[index];
    let mut next_one = path[depth].weight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        let fi = i as f64;
        if one_fraction != 0.0 {
            let tmp = next_one * (d + 1.0) / ((fi + 1.0) * one_fraction);
            total += tmp;
            next_one = path[i].weight - tmp * zero_fraction * (d - fi) / (d + 1.0);
        } else if zero_fraction != 0.0 {
            total += path[i].weight / zero_fraction / ((d - fi) / (d + 1.0));
        }
    }
    total
}

struct Recursion<'a> {
    tree: &'a Tree,
    row: &'a [Option<f64>],
    phi: &'a mut [f64],
    scale: f64,
}

impl Recursion<'_> {
    fn visit(
        &mut self,
        node: usize,
        mut path: Vec<PathElement>,
        zero_fraction: f64,
        one_fraction: f64,
        feature: Option<usize>,
    ) {
        extend_path(&mut path, zero_fraction, one_fraction, feature);
        match &self.tree.nodes[node] {
            Node::Leaf { value, .. } => {
                for i in 1..path.len() {
                    let w = unwound_sum(&path, i);
                    let el = path[i];
                    let f = el.feature.expect("only the root element has no feature");
                    self.phi[f] += self.scale * w * (el.one_fraction - el.zero_fraction) * value;
                }
            }
            Node::Split { feature: split, left, right, cover, .. } => {
                let hot = self.tree.route(node, self.row[*split]);
                let cold = if hot == *left { *right } else { *left };
                let hot_zero = self.tree.nodes[hot].cover() / cover;
                let cold_zero = self.tree.nodes[cold].cover() / cover;
                let (mut incoming_zero, mut incoming_one) = (1.0, 1.0);
                if let Some(k) = path.iter().position(|el| el.feature == Some(*split)) {
                    incoming_zero = path[k].zero_fraction;
                    incoming_one = path[k].one_fraction;
                    unwind_path(&mut path, k);
                }
                self.visit(hot, path.clone(), hot_zero * incoming_zero, incoming_one, Some(*split));
                self.visit(cold, path, cold_zero * incoming_zero, 0.0, Some(*split));
            }
        }
    }
}

fn check_row(model: &TreeEnsembleModel, row: &[Option<f64>]) -> Result<()> {
    if row.len() != model.feature_names.len() {
        return Err(Error::Schema(format!(
            "row has {} cells but the model has {} features",
            row.len(),
            model.feature_names.len()
        )));
    }
    Ok(())
}

/// Exact path-dependent Shapley values for one row, given in model feature
/// order.
pub fn tree_shap(model: &TreeEnsembleModel, row: &[Option<f64>], row_id: &str) -> Result<ShapAttribution> {
    check_row(model, row)?;
    check_covers(model)?;
    let (scale, offset) = combination(model);
    let mut values = vec![0.0; row.len()];
    let mut base_value = offset;
    for tree in &model.trees {
        base_value += scale * conditional_expectation(tree, 0, row, &|_| false);
        let mut rec = Recursion { tree, row, phi: &mut values, scale };
        rec.visit(0, Vec::new(), 1.0, 1.0, None);
    }
    Ok(ShapAttribution { row_id: row_id.to_string(), base_value, values })
}

/// Shapley values by enumerating every subset of the features the model
/// splits on, using the same conditional expectations as `tree_shap`.
pub fn brute_force_shap(
    model: &TreeEnsembleModel,
    row: &[Option<f64>],
    row_id: &str,
    max_features: usize,
) -> Result<ShapAttribution> {
    check_row(model, row)?;
    check_covers(model)?;
    let mut used: Vec<usize> = model
        .trees
        .iter()
        .flat_map(|t| t.nodes.iter())
        .filter_map(|n| match n {
            Node::Split { feature, .. } => Some(*feature),
            Node::Leaf { .. } => None,
        })
        .collect();
    used.sort_unstable();
    used.dedup();
    let limit = max_features.min(ORACLE_FEATURE_LIMIT);
    if used.len() > limit {
        return Err(Error::OracleScope(format!(
            "model splits on {} features; the oracle enumerates at most {limit}",
            used.len()
        )));
    }
    let (scale, offset) = combination(model);
    let n = used.len();
    let value = |mask: usize| -> f64 {
        let known = |f: usize| used.iter().position(|&u| u == f).is_some_and(|k| mask >> k & 1 == 1);
        offset
            + model
                .trees
                .iter()
                .map(|t| scale * conditional_expectation(t, 0, row, &known))
                .sum::<f64>()
    };
    let v: Vec<f64> = (0..1usize << n).map(value).collect();
    let mut fact = vec![1.0f64; n + 1];
    for i in 1..=n {
        fact[i] = fact[i - 1] * i as f64;
    }
    let mut values = vec![0.0; row.len()];
    for (k, &f) in used.iter().enumerate() {
        let mut phi = 0.0;
        for mask in 0..1usize << n {
            if mask >> k & 1 == 1 {
                continue;
            }
            let s = mask.count_ones() as usize;
            let weight = fact[s] * fact[n - s - 1] / fact[n];
            phi += weight * (v[mask | 1 << k] - v[mask]);
        }
        values[f] = phi;
    }
    Ok(ShapAttribution { row_id: row_id.to_string(), base_value: v[0], values })
}

fn column_map(model: &TreeEnsembleModel, matrix: &FeatureMatrix) -> Result<Vec<usize>> {
    model
        .feature_names
        .iter()
        .map(|n| {
            matrix
                .column_index(n)
                .ok_or_else(|| Error::Schema(format!("model feature '{n}' missing from input")))
        })
        .collect()
}

/// Attributions for every row of a matrix; columns are matched by name.
pub fn explain_matrix(model: &TreeEnsembleModel, matrix: &FeatureMatrix) -> Result<Vec<ShapAttribution>> {
    let map = column_map(model, matrix)?;
    check_covers(model)?;
    (0..matrix.n_rows())
        .into_par_iter()
        .map(|r| {
            let row: Vec<Option<f64>> = map.iter().map(|&c| matrix.get(r, c)).collect();
            tree_shap(model, &row, &matrix.row_ids()[r])
        })
        .collect()
}

/// Mean absolute attribution per feature, largest first; ties are ordered
/// by name.
pub fn mean_abs_shap(model: &TreeEnsembleModel, matrix: &FeatureMatrix) -> Result<Vec<(String, f64)>> {
    if matrix.n_rows() == 0 {
        return Err(Error::EmptyInput("no rows to attribute".into()));
    }
    let attributions = explain_matrix(model, matrix)?;
    Ok(rank_mean_abs(&model.feature_names, &attributions))
}

pub fn rank_mean_abs(feature_names: &[String], attributions: &[ShapAttribution]) -> Vec<(String, f64)> {
    let n = attributions.len().max(1) as f64;
    let mut ranked: Vec<(String, f64)> = feature_names
        .iter()
        .enumerate()
        .map(|(f, name)| (name.clone(), attributions.iter().map(|a| a.values[f].abs()).sum::<f64>() / n))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked
}

/// Long-format table with one line per (row, feature):
/// `row_id,feature,shap_value,feature_value,feature_missing`.
pub fn export_beeswarm<W: Write>(
    attributions: &[ShapAttribution],
    feature_names: &[String],
    matrix: &FeatureMatrix,
    out: W,
) -> Result<()> {
    if attributions.len() != matrix.n_rows() {
        return Err(Error::Pairing(format!(
            "{} attributions for {} matrix rows",
            attributions.len(),
            matrix.n_rows()
        )));
    }
    let cols: Vec<usize> = feature_names
        .iter()
        .map(|n| {
            matrix
                .column_index(n)
                .ok_or_else(|| Error::Pairing(format!("feature '{n}' missing from matrix")))
        })
        .collect::<Result<_>>()?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["row_id", "feature", "shap_value", "feature_value", "feature_missing"])?;
    for (r, a) in attributions.iter().enumerate() {
        if a.row_id != matrix.row_ids()[r] || a.values.len() != feature_names.len() {
            return Err(Error::Pairing(format!("attribution {r} does not match matrix row '{}'", matrix.row_ids()[r])));
        }
        for ((name, &c), v) in feature_names.iter().zip(&cols).zip(&a.values) {
            let cell = matrix.get(r, c);
            w.write_record([
                a.row_id.as_str(),
                name,
                &v.to_string(),
                &cell.map(|x| x.to_string()).unwrap_or_default(),
                if cell.is_none() { "true" } else { "false" },
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Two-column table `feature,mean_abs_shap`.
pub fn write_importance<W: Write>(ranked: &[(String, f64)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["feature", "mean_abs_shap"])?;
    for (name, v) in ranked {
        w.write_record([name.as_str(), &v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
