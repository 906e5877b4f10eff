//! Tree learners written from scratch: histogram gradient boosting with
//! native missing-value routing, random forests, and a logistic baseline.

mod binning;
mod config;
mod forest;
mod gbdt;
mod logistic;
mod model;
mod tree;

pub use binning::{bin_features, BinMapper, BinnedMatrix};
pub use config::{ClassWeight, Family, Growth, LearnerConfig};
pub use forest::fit_forest;
pub use gbdt::{best_histogram_split, fit_gbdt, split_gain, FeatureHistogram, SplitCandidate};
pub use logistic::{fit_logistic, LogisticModel};
pub use model::{fit_model, predict_proba, Model, TreeEnsembleModel, MODEL_FORMAT_VERSION};
pub use tree::{Node, Tree};

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Resolve class weights and check both classes are present.
pub(crate) fn sample_weights(labels: &[u8], weight: ClassWeight) -> crate::Result<(Vec<f64>, f64)> {
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(crate::Error::Fit(format!(
            "both classes required ({pos} positive, {neg} negative)"
        )));
    }
    let w = match weight {
        ClassWeight::Auto => neg as f64 / pos as f64,
        ClassWeight::Fixed(w) => w,
    };
    Ok((labels.iter().map(|&y| if y == 1 { w } else { 1.0 }).collect(), w))
}
