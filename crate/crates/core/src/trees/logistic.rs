use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::sigmoid;
use crate::error::{Error, Result};
use crate::records::FeatureMatrix;

const MAX_ITER: usize = 100;
const TOLERANCE: f64 = 1e-8;
const WEIGHT_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub feature_names: Vec<String>,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub l2_regularization: f64,
    /// Fill value per feature for missing cells at prediction time.
    pub impute_means: Vec<f64>,
    pub iterations: usize,
}

impl LogisticModel {
    pub fn margin(&self, cell: impl Fn(usize) -> Option<f64>) -> f64 {
        self.intercept
            + self
                .weights
                .iter()
                .enumerate()
                .map(|(j, w)| w * cell(j).unwrap_or(self.impute_means[j]))
                .sum::<f64>()
    }
}

/// L2-penalized logistic regression fitted by iteratively reweighted least
/// squares. The intercept is not penalized.
pub fn fit_logistic(matrix: &FeatureMatrix, labels: &[u8], l2: f64) -> Result<LogisticModel> {
    let n = matrix.n_rows();
    let p = matrix.n_cols();
    if labels.len() != n {
        return Err(Error::Parameter(format!("{} labels for {n} rows", labels.len())));
    }
    if !(l2 >= 0.0 && l2.is_finite()) {
        return Err(Error::Parameter(format!("l2 must be non-negative, got {l2}")));
    }
    let pos = labels.iter().filter(|&&y| y == 1).count();
    if pos == 0 || pos == n {
        return Err(Error::Fit("both classes required".into()));
    }
    let mut x = DMatrix::<f64>::zeros(n, p + 1);
    for r in 0..n {
        x[(r, 0)] = 1.0;
        for c in 0..p {
            x[(r, c + 1)] = matrix.get(r, c).ok_or_else(|| {
                Error::Parameter(format!(
                    "missing value at row {r}, column '{}'; impute before fitting",
                    matrix.columns()[c].name
                ))
            })?;
        }
    }
    let y = DVector::from_iterator(n, labels.iter().map(|&v| f64::from(v)));
    let mut penalty = DMatrix::<f64>::identity(p + 1, p + 1) * l2;
    penalty[(0, 0)] = 0.0;
    let mut beta = DVector::<f64>::zeros(p + 1);
    let diverged = || {
        Error::Divergence(format!(
            "IRLS did not converge within {MAX_ITER} iterations at l2 = {l2}"
        ))
    };
    let mut iterations = 0;
    loop {
        iterations += 1;
        let eta = &x * &beta;
        let prob = eta.map(sigmoid);
        let w = prob.map(|q| q * (1.0 - q));
        let grad = x.transpose() * (&y - &prob) - &penalty * &beta;
        let mut xw = x.clone();
        for (r, mut row) in xw.row_iter_mut().enumerate() {
            row *= w[r];
        }
        let hessian = x.transpose() * xw + &penalty;
        let step = hessian.lu().solve(&grad).ok_or_else(diverged)?;
        beta += &step;
        if beta.iter().any(|b| !b.is_finite() || b.abs() > WEIGHT_LIMIT) {
            return Err(diverged());
        }
        if step.amax() < TOLERANCE {
            break;
        }
        if iterations >= MAX_ITER {
            return Err(diverged());
        }
    }
    Ok(LogisticModel {
        feature_names: matrix.column_names(),
        weights: beta.iter().skip(1).copied().collect(),
        intercept: beta[0],
        l2_regularization: l2,
        impute_means: vec![0.0; p],
        iterations,
    })
}
