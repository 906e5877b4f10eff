use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::records::{ColumnKind, FeatureMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledColumn {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
}

/// Z-score standardization of the physicochemical columns; every other
/// column passes through unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub columns: Vec<ScaledColumn>,
}

impl Scaler {
    /// Apply to a matrix carrying the fitted columns; missing cells stay missing.
    pub fn transform(&self, matrix: &FeatureMatrix) -> Result<FeatureMatrix> {
        let mut out = matrix.clone();
        for col in &self.columns {
            let c = matrix
                .column_index(&col.name)
                .ok_or_else(|| Error::Schema(format!("scaled column '{}' missing", col.name)))?;
            for r in 0..matrix.n_rows() {
                if let Some(v) = matrix.get(r, c) {
                    let z = if col.sd > 0.0 { (v - col.mean) / col.sd } else { 0.0 };
                    out.set(r, c, Some(z));
                }
            }
        }
        Ok(out)
    }
}

/// Fit on the non-missing values of each physicochemical column at `rows`
/// (population SD). Zero-SD columns map to 0.
pub fn fit_fold_scaler(matrix: &FeatureMatrix, rows: &[usize]) -> Scaler {
    let columns = matrix
        .columns()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.kind == ColumnKind::Physicochemical)
        .map(|(c, col)| {
            let values: Vec<f64> = rows.iter().filter_map(|&r| matrix.get(r, c)).collect();
            let n = values.len() as f64;
            let (mean, sd) = if values.is_empty() {
                (0.0, 0.0)
            } else {
                let mean = values.iter().sum::<f64>() / n;
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                (mean, var.sqrt())
            };
            ScaledColumn {
                name: col.name.clone(),
                mean,
                sd,
            }
        })
        .collect();
    Scaler { columns }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::Column;

    fn matrix() -> FeatureMatrix {
        let cols = vec![Column::new("ph"), Column::new("tds_ppm"), Column::new("source_type=tap"), Column::new("ptc")];
        let rows: Vec<Vec<Option<f64>>> = (0..10)
            .map(|i| vec![Some(6.0 + i as f64 * 0.2), Some(300.0), Some((i % 2) as f64), Some(0.1 * i as f64)])
            .collect();
        FeatureMatrix::from_rows(cols, (0..10).map(|i| i.to_string()).collect(), &rows).unwrap()
    }

    #[test]
    fn standardizes_physicochemical_only() {
        let m = matrix();
        let rows: Vec<usize> = (0..10).collect();
        let s = fit_fold_scaler(&m, &rows);
        assert_eq!(s.columns.len(), 2);
        let t = s.transform(&m).unwrap();
        let ph: Vec<f64> = t.column_values(0).into_iter().flatten().collect();
        let mean = ph.iter().sum::<f64>() / 10.0;
        let var = ph.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 10.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
        assert!(t.column_values(1).iter().all(|v| *v == Some(0.0)));
        assert_eq!(t.column_values(2), m.column_values(2));
        assert_eq!(t.column_values(3), m.column_values(3));
    }

    #[test]
    fn uses_only_fit_rows() {
        let m = matrix();
        let s = fit_fold_scaler(&m, &[0, 1]);
        assert!((s.columns[0].mean - 6.1).abs() < 1e-12);
    }
}
