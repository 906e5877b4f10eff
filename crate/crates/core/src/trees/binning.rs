use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::records::FeatureMatrix;

/// Per-column bin edges learned from training values.
///
/// Column `c` has `edges[c].len() + 1` value bins. A value `v` falls in bin
/// `b` when `edges[b-1] < v <= edges[b]`; the last value bin is unbounded
/// above. Missing cells go to the reserved bin `edges[c].len() + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinMapper {
    pub feature_names: Vec<String>,
    pub edges: Vec<Vec<f64>>,
}

impl BinMapper {
    pub fn fit(matrix: &FeatureMatrix, max_bins: usize) -> Result<Self> {
        if !(2..=256).contains(&max_bins) {
            return Err(Error::Parameter(format!("max_bins must lie in [2, 256], got {max_bins}")));
        }
        if matrix.n_rows() == 0 || matrix.n_cols() == 0 {
            return Err(Error::EmptyInput("cannot bin an empty matrix".into()));
        }
        let edges = (0..matrix.n_cols())
            .map(|c| {
                let mut values: Vec<f64> = matrix.column_values(c).into_iter().flatten().collect();
                values.sort_by(f64::total_cmp);
                column_edges(&values, max_bins - 1)
            })
            .collect();
        Ok(BinMapper {
            feature_names: matrix.column_names(),
            edges,
        })
    }

    pub fn n_value_bins(&self, col: usize) -> usize {
        self.edges[col].len() + 1
    }

    pub fn missing_bin(&self, col: usize) -> usize {
        self.n_value_bins(col)
    }

    pub fn bin_value(&self, col: usize, value: Option<f64>) -> usize {
        match value {
            Some(v) => self.edges[col].partition_point(|&e| e < v),
            None => self.missing_bin(col),
        }
    }

    /// Upper value threshold of bin `bin`; the last value bin has none.
    pub fn threshold(&self, col: usize, bin: usize) -> f64 {
        self.edges[col].get(bin).copied().unwrap_or(f64::MAX)
    }

    /// Bin a matrix whose columns match the mapper's feature names.
    pub fn transform(&self, matrix: &FeatureMatrix) -> Result<BinnedMatrix> {
        if matrix.column_names() != self.feature_names {
            return Err(Error::Schema("matrix columns differ from the binned feature set".into()));
        }
        let n = matrix.n_rows();
        let mut bins = vec![0u8; n * matrix.n_cols()];
        for c in 0..matrix.n_cols() {
            for r in 0..n {
                bins[c * n + r] = self.bin_value(c, matrix.get(r, c)) as u8;
            }
        }
        Ok(BinnedMatrix {
            n_rows: n,
            bins,
            mapper: self.clone(),
        })
    }
}

/// Quantile edges over sorted values, at most `max_value_bins - 1` of them.
fn column_edges(sorted: &[f64], max_value_bins: usize) -> Vec<f64> {
    let mut distinct = sorted.to_vec();
    distinct.dedup();
    if distinct.len() <= 1 {
        return Vec::new();
    }
    let top = *distinct.last().unwrap();
    if distinct.len() <= max_value_bins {
        distinct.pop();
        return distinct;
    }
    let n = sorted.len();
    let mut edges: Vec<f64> = (1..max_value_bins)
        .map(|i| sorted[(i * n / max_value_bins).saturating_sub(1)])
        .filter(|&e| e < top)
        .collect();
    edges.dedup();
    edges
}

/// Column-major bin indices plus the mapper that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedMatrix {
    n_rows: usize,
    bins: Vec<u8>,
    mapper: BinMapper,
}

impl BinnedMatrix {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.mapper.edges.len()
    }

    pub fn mapper(&self) -> &BinMapper {
        &self.mapper
    }

    pub fn bin(&self, row: usize, col: usize) -> usize {
        self.bins[col * self.n_rows + row] as usize
    }

    pub fn column(&self, col: usize) -> &[u8] {
        &self.bins[col * self.n_rows..(col + 1) * self.n_rows]
    }

    pub fn missing_bin(&self, col: usize) -> usize {
        self.mapper.missing_bin(col)
    }
}

/// Fit quantile bins on `matrix` and apply them to it.
pub fn bin_features(matrix: &FeatureMatrix, max_bins: usize) -> Result<BinnedMatrix> {
    BinMapper::fit(matrix, max_bins)?.transform(matrix)
}
