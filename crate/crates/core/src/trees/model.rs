use serde::{Deserialize, Serialize};

use super::binning::BinMapper;
use super::config::{Family, LearnerConfig};
use super::forest::fit_forest;
use super::gbdt::fit_gbdt;
use super::logistic::{fit_logistic, LogisticModel};
use super::sigmoid;
use super::tree::Tree;
use crate::error::{Error, Result};
use crate::records::FeatureMatrix;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Boosted or bagged tree ensemble.
///
/// Boosting sums leaf log-odds onto `base_score`; a forest averages leaf
/// positive fractions. Only `trees[..best_iteration]` are kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsembleModel {
    pub family: Family,
    pub trees: Vec<Tree>,
    pub base_score: f64,
    pub best_iteration: usize,
    pub bin_edges: Vec<Vec<f64>>,
    pub feature_names: Vec<String>,
    pub config: LearnerConfig,
    pub resolved_class_weight: f64,
    /// Weighted training log-loss before boosting and after every round.
    pub train_loss: Vec<f64>,
    /// Class-weighted validation log-loss after every round.
    pub valid_loss: Vec<f64>,
}

impl TreeEnsembleModel {
    /// Raw score of one row: log-odds for boosting, mean leaf value for a
    /// forest.
    pub fn raw_score(&self, cell: impl Fn(usize) -> Option<f64> + Copy) -> f64 {
        match self.family {
            Family::RandomForest => {
                if self.trees.is_empty() {
                    return 0.5;
                }
                self.trees.iter().map(|t| t.predict(cell)).sum::<f64>() / self.trees.len() as f64
            }
            _ => self.base_score + self.trees.iter().map(|t| t.predict(cell)).sum::<f64>(),
        }
    }

    pub fn probability(&self, cell: impl Fn(usize) -> Option<f64> + Copy) -> f64 {
        let s = self.raw_score(cell);
        match self.family {
            Family::RandomForest => s.clamp(0.0, 1.0),
            _ => sigmoid(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Model {
    Ensemble(TreeEnsembleModel),
    Logistic(LogisticModel),
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format_version: u32,
    #[serde(flatten)]
    model: Model,
}

impl Model {
    pub fn feature_names(&self) -> &[String] {
        match self {
            Model::Ensemble(m) => &m.feature_names,
            Model::Logistic(m) => &m.feature_names,
        }
    }

    pub fn family(&self) -> Family {
        match self {
            Model::Ensemble(m) => m.family,
            Model::Logistic(_) => Family::Logistic,
        }
    }

    pub fn best_iteration(&self) -> usize {
        match self {
            Model::Ensemble(m) => m.best_iteration,
            Model::Logistic(m) => m.iterations,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::UnsupportedModel(format!(
                "model format version {} (expected {MODEL_FORMAT_VERSION})",
                doc.format_version
            )));
        }
        Ok(doc.model)
    }
}

fn column_map(names: &[String], matrix: &FeatureMatrix) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|n| {
            matrix
                .column_index(n)
                .ok_or_else(|| Error::Schema(format!("model feature '{n}' missing from input")))
        })
        .collect()
}

pub(crate) fn predict_ensemble(model: &TreeEnsembleModel, matrix: &FeatureMatrix) -> Result<Vec<f64>> {
    let map = column_map(&model.feature_names, matrix)?;
    Ok((0..matrix.n_rows())
        .map(|r| model.probability(|f| matrix.get(r, map[f])))
        .collect())
}

/// Positive-class probabilities. Input columns are matched by name.
pub fn predict_proba(model: &Model, matrix: &FeatureMatrix) -> Result<Vec<f64>> {
    match model {
        Model::Ensemble(m) => predict_ensemble(m, matrix),
        Model::Logistic(m) => {
            let map = column_map(&m.feature_names, matrix)?;
            Ok((0..matrix.n_rows())
                .map(|r| sigmoid(m.margin(|f| matrix.get(r, map[f]))))
                .collect())
        }
    }
}

fn column_means(matrix: &FeatureMatrix) -> Vec<f64> {
    (0..matrix.n_cols())
        .map(|c| {
            let present: Vec<f64> = matrix.column_values(c).into_iter().flatten().collect();
            if present.is_empty() {
                0.0
            } else {
                present.iter().sum::<f64>() / present.len() as f64
            }
        })
        .collect()
}

fn impute(matrix: &FeatureMatrix, means: &[f64]) -> Result<FeatureMatrix> {
    let rows: Vec<Vec<Option<f64>>> = (0..matrix.n_rows())
        .map(|r| (0..matrix.n_cols()).map(|c| Some(matrix.get(r, c).unwrap_or(means[c]))).collect())
        .collect();
    FeatureMatrix::from_rows(matrix.columns().to_vec(), matrix.row_ids().to_vec(), &rows)
}

/// Fit the learner named by `config.family`.
///
/// Boosting bins on `train` only and early-stops on `valid`; the forest
/// ignores `valid`; the logistic baseline fills missing cells with training
/// column means.
pub fn fit_model(
    config: &LearnerConfig,
    train: &FeatureMatrix,
    labels: &[u8],
    valid: Option<(&FeatureMatrix, &[u8])>,
) -> Result<Model> {
    config.validate()?;
    match config.family {
        Family::HistGbdt => {
            let mapper = BinMapper::fit(train, config.max_bins)?;
            let binned = mapper.transform(train)?;
            let valid_binned = match valid {
                Some((vm, _)) if config.early_stopping_rounds > 0 => Some(mapper.transform(&vm.select_columns(&mapper.feature_names)?)?),
                _ => None,
            };
            let valid_arg = valid_binned.as_ref().zip(valid.map(|v| v.1));
            Ok(Model::Ensemble(fit_gbdt(&binned, labels, config, valid_arg)?))
        }
        Family::RandomForest => Ok(Model::Ensemble(fit_forest(train, labels, config)?)),
        Family::Logistic => {
            let means = column_means(train);
            let mut model = fit_logistic(&impute(train, &means)?, labels, config.l2_regularization)?;
            model.impute_means = means;
            Ok(Model::Logistic(model))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::Column;
    use crate::trees::tree::Node;

    fn matrix(rows: &[Vec<Option<f64>>]) -> FeatureMatrix {
        let columns = (0..rows[0].len()).map(|c| Column::new(format!("f{c}"))).collect();
        let ids = (0..rows.len()).map(|i| format!("r{i}")).collect();
        FeatureMatrix::from_rows(columns, ids, rows).unwrap()
    }

    fn toy() -> (FeatureMatrix, Vec<u8>) {
        let rows: Vec<Vec<Option<f64>>> = (0..80)
            .map(|i| vec![Some((i % 17) as f64), if i % 5 == 0 { None } else { Some((i % 7) as f64) }])
            .collect();
        let labels = (0..80).map(|i| u8::from(i % 17 > 8 || i % 5 == 0)).collect();
        (matrix(&rows), labels)
    }

    fn empty_ensemble(family: Family, trees: Vec<Tree>, base: f64) -> TreeEnsembleModel {
        TreeEnsembleModel {
            family,
            best_iteration: trees.len(),
            trees,
            base_score: base,
            bin_edges: Vec::new(),
            feature_names: vec!["f0".into()],
            config: LearnerConfig::default(),
            resolved_class_weight: 1.0,
            train_loss: Vec::new(),
            valid_loss: Vec::new(),
        }
    }

    #[test]
    fn base_cases() {
        let m = matrix(&[vec![Some(1.0)], vec![None]]);
        let e = empty_ensemble(Family::HistGbdt, Vec::new(), 0.7);
        for p in predict_ensemble(&e, &m).unwrap() {
            assert!((p - sigmoid(0.7)).abs() < 1e-15);
        }
        let z = empty_ensemble(Family::HistGbdt, Vec::new(), 0.0);
        assert_eq!(predict_ensemble(&z, &m).unwrap(), vec![0.5, 0.5]);
        let f = empty_ensemble(Family::RandomForest, vec![Tree::constant(0.3, 1.0); 4], 0.0);
        for p in predict_ensemble(&f, &m).unwrap() {
            assert!((p - 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn json_round_trip_is_bitwise() {
        let (m, y) = toy();
        for cfg in [
            LearnerConfig { iteration_cap: 30, early_stopping_rounds: 0, min_samples_per_leaf: 2, ..LearnerConfig::default() },
            LearnerConfig { iteration_cap: 10, ..LearnerConfig::random_forest() },
            LearnerConfig::logistic(),
        ] {
            let model = fit_model(&cfg, &m, &y, None).unwrap();
            let back = Model::from_json(&model.to_json().unwrap()).unwrap();
            assert_eq!(back, model);
            let a = predict_proba(&model, &m).unwrap();
            let b = predict_proba(&back, &m).unwrap();
            assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
            assert!(a.iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }

    #[test]
    fn schema_and_version_checks() {
        let (m, y) = toy();
        let model = fit_model(&LearnerConfig::logistic(), &m, &y, None).unwrap();
        let other = matrix(&[vec![Some(1.0)]]);
        assert!(matches!(predict_proba(&model, &other), Err(Error::Schema(_))));
        let text = model.to_json().unwrap().replace("\"format_version\":1", "\"format_version\":99");
        assert!(matches!(Model::from_json(&text), Err(Error::UnsupportedModel(_))));
    }

    #[test]
    fn splits_have_a_default_direction() {
        let (m, y) = toy();
        let cfg = LearnerConfig { iteration_cap: 5, early_stopping_rounds: 0, min_samples_per_leaf: 2, ..LearnerConfig::default() };
        let Model::Ensemble(e) = fit_model(&cfg, &m, &y, None).unwrap() else { panic!() };
        let text = serde_json::to_string(&e).unwrap();
        let n_splits = e.trees.iter().flat_map(|t| &t.nodes).filter(|n| matches!(n, Node::Split { .. })).count();
        assert!(n_splits > 0);
        assert_eq!(text.matches("\"default_left\":").count(), n_splits);
    }
}
