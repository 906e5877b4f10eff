//! Inferential statistics: 2x2 contingency analysis, the stratified paired
//! bootstrap for metric differences, Benjamini-Hochberg FDR and McNemar.

mod bootstrap;
mod compare;
mod contingency;
mod fdr;
mod mcnemar;
mod special;

pub use bootstrap::{paired_bootstrap_delta, DeltaMetric, DeltaResult};
pub use compare::{compare_models, ComparisonReport, DeltaRow, McNemarRow};
pub use contingency::{contingency_stats, ContingencyCounts, ContingencyStats};
pub use fdr::bh_fdr;
pub use mcnemar::{mcnemar, McNemarResult};
pub use special::{chi2_sf_df1, erfc};
