use std::io::Write;

use serde::{Deserialize, Serialize};

use super::bootstrap::{paired_bootstrap_delta, DeltaMetric, DeltaResult};
use super::fdr::bh_fdr;
use super::mcnemar::mcnemar;
use crate::error::{Error, Result};
use crate::pipeline::CvReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub challenger: String,
    #[serde(flatten)]
    pub result: DeltaResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McNemarRow {
    pub challenger: String,
    pub b: usize,
    pub c: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub q_value: f64,
    pub reference_threshold: f64,
    pub challenger_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub reference: String,
    pub n_boot: usize,
    pub seed: u64,
    pub deltas: Vec<DeltaRow>,
    pub mcnemar: Vec<McNemarRow>,
}

impl ComparisonReport {
    /// Flat table: one row per (challenger, metric), McNemar rows last.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["challenger", "metric", "delta", "ci_low", "ci_high", "p", "q", "significant_at_0.05"])?;
        for row in &self.deltas {
            let r = &row.result;
            let q = r.q_value.unwrap_or(f64::NAN);
            w.write_record([
                row.challenger.clone(),
                r.metric.as_str().to_string(),
                r.delta.to_string(),
                r.ci_low.to_string(),
                r.ci_high.to_string(),
                r.p_value.to_string(),
                q.to_string(),
                (q < 0.05).to_string(),
            ])?;
        }
        for row in &self.mcnemar {
            w.write_record([
                row.challenger.clone(),
                "mcnemar".to_string(),
                String::new(),
                String::new(),
                String::new(),
                row.p_value.to_string(),
                row.q_value.to_string(),
                (row.q_value < 0.05).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_pairing(reference: &CvReport, challenger: &CvReport) -> Result<()> {
    let mismatch = |what: String| {
        Err(Error::Pairing(format!(
            "'{}' vs '{}': {what}",
            reference.name, challenger.name
        )))
    };
    if reference.k != challenger.k || reference.folds.len() != challenger.folds.len() {
        return mismatch(format!("fold counts differ ({} vs {})", reference.k, challenger.k));
    }
    if reference.labels != challenger.labels {
        return mismatch("labels differ".into());
    }
    for (a, b) in reference.folds.iter().zip(&challenger.folds) {
        if a.fold != b.fold || a.held_out != b.held_out {
            return mismatch(format!("fold {}: held-out indices differ", a.fold));
        }
    }
    Ok(())
}

/// Paired comparison of challengers against a reference on identical folds.
///
/// ROC-AUC and average-precision deltas come from the stratified paired
/// bootstrap; each metric is its own BH family. McNemar tests at every
/// model's global threshold form a third family. Every challenger is
/// resampled with the same bootstrap indices, so each row is independent of
/// which other challengers are present.
pub fn compare_models(
    reference: &CvReport,
    challengers: &[CvReport],
    n_boot: usize,
    seed: u64,
) -> Result<ComparisonReport> {
    if challengers.is_empty() {
        return Err(Error::EmptyInput("no challengers to compare".into()));
    }
    for c in challengers {
        check_pairing(reference, c)?;
    }
    let fold_ids = reference.fold_ids();
    let labels = &reference.labels;
    let mut deltas = Vec::new();
    for metric in DeltaMetric::ALL {
        let mut family: Vec<DeltaResult> = challengers
            .iter()
            .map(|c| {
                paired_bootstrap_delta(
                    &reference.oof_calibrated,
                    &c.oof_calibrated,
                    labels,
                    &fold_ids,
                    metric,
                    n_boot,
                    seed,
                )
            })
            .collect::<Result<_>>()?;
        let q = bh_fdr(&family.iter().map(|r| r.p_value).collect::<Vec<_>>())?;
        for (r, q) in family.iter_mut().zip(q) {
            r.q_value = Some(q);
        }
        deltas.extend(challengers.iter().zip(family).map(|(c, result)| DeltaRow {
            challenger: c.name.clone(),
            result,
        }));
    }
    let ref_correct = reference.correct_at(reference.global_threshold);
    let tests = challengers
        .iter()
        .map(|c| mcnemar(&ref_correct, &c.correct_at(c.global_threshold)))
        .collect::<Result<Vec<_>>>()?;
    let q = bh_fdr(&tests.iter().map(|t| t.p_value).collect::<Vec<_>>())?;
    let mcnemar = challengers
        .iter()
        .zip(tests)
        .zip(q)
        .map(|((c, t), q)| McNemarRow {
            challenger: c.name.clone(),
            b: t.b,
            c: t.c,
            statistic: t.statistic,
            p_value: t.p_value,
            q_value: q,
            reference_threshold: reference.global_threshold,
            challenger_threshold: c.global_threshold,
        })
        .collect();
    Ok(ComparisonReport {
        reference: reference.name.clone(),
        n_boot,
        seed,
        deltas,
        mcnemar,
    })
}
