use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::calibrate::{fit_calibrator, CalibrationMethod, Calibrator};
use super::folds::FoldPlan;
use super::scaler::fit_fold_scaler;
use super::threshold::select_threshold;
use crate::digest::sha256_hex;
use crate::error::{Error, Result};
use crate::metrics::{classification_bundle, confusion_at, roc_auc, MetricBundle};
use crate::records::{stratified_split, Column, FeatureMatrix, PTC_COLUMN};
use crate::rng::derive_seed;
use crate::trees::{fit_model, predict_proba, LearnerConfig, Model};

/// How stage-2 training rows obtain their PTC values.
///
/// `Nested` cross-fits stage 1 inside each fold's training portion, so no
/// label of a held-out row reaches that fold's stage-2 model. `Concatenated`
/// reuses the outer out-of-fold vector for every fold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PtcMode {
    #[default]
    Nested,
    Concatenated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PtcVector {
    /// Out-of-fold stage-1 probability per row.
    pub values: Vec<f64>,
    pub stage1_auc: f64,
    pub mode: PtcMode,
    /// Per fold: PTC for that fold's training rows, in row order.
    pub fold_training: Vec<Vec<f64>>,
    /// SHA-256 of each outer-fold stage-1 model document.
    pub fold_model_digests: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub held_out: Vec<usize>,
    pub raw: Vec<f64>,
    pub calibrated: Vec<f64>,
    pub threshold: f64,
    /// F-beta of the held-out rows at `threshold`.
    pub fbeta: f64,
    pub best_iteration: usize,
    pub calibrator: Calibrator,
    pub model_digest: String,
}

/// Out-of-fold stage-2 results with the exact held-out indices of every fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub name: String,
    pub uses_ptc: bool,
    pub k: usize,
    pub beta: f64,
    pub labels: Vec<u8>,
    pub folds: Vec<FoldReport>,
    pub oof_raw: Vec<f64>,
    pub oof_calibrated: Vec<f64>,
    /// Pooled metrics; decisions use each fold's own threshold.
    pub metrics: MetricBundle,
    pub threshold_mean: f64,
    /// Sample SD over the k fold thresholds.
    pub threshold_sd: f64,
    /// Mean over folds of the held-out F-beta; the model-selection score.
    pub mean_fold_fbeta: f64,
    /// F-beta threshold chosen on the pooled calibrated OOF probabilities.
    pub global_threshold: f64,
    pub stage1_auc: Option<f64>,
}

impl CvReport {
    pub fn fold_ids(&self) -> Vec<usize> {
        let mut ids = vec![0; self.labels.len()];
        for f in &self.folds {
            for &i in &f.held_out {
                ids[i] = f.fold;
            }
        }
        ids
    }

    /// Correct / incorrect per row at a fixed threshold.
    pub fn correct_at(&self, threshold: f64) -> Vec<bool> {
        self.oof_calibrated
            .iter()
            .zip(&self.labels)
            .map(|(&p, &y)| (p >= threshold) == (y == 1))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn pick(labels: &[u8], rows: &[usize]) -> Vec<u8> {
    rows.iter().map(|&i| labels[i]).collect()
}

/// Scale on `train` rows, fit with early stopping on `valid`, and return the
/// model with the scaled matrix it was trained against.
fn fit_scaled(
    matrix: &FeatureMatrix,
    labels: &[u8],
    train: &[usize],
    valid: &[usize],
    config: &LearnerConfig,
) -> Result<(Model, FeatureMatrix)> {
    let scaled = fit_fold_scaler(matrix, train).transform(matrix)?;
    let tr = scaled.select_rows(train);
    let va = scaled.select_rows(valid);
    let valid_labels = pick(labels, valid);
    let model = fit_model(config, &tr, &pick(labels, train), Some((&va, &valid_labels)))?;
    Ok((model, scaled))
}

fn seeded(config: &LearnerConfig, tag: &str, index: u64) -> LearnerConfig {
    LearnerConfig {
        seed: derive_seed(config.seed, tag, index),
        ..config.clone()
    }
}

/// Out-of-fold stage-1 probabilities of total-coliform presence.
///
/// Fold `f`'s rows are scored by a model fitted on `f`'s inner-train (scaler
/// included) with early stopping on its inner-valid. In nested mode every
/// fold's training rows are additionally scored by models fitted on the
/// remaining folds of that training portion.
pub fn generate_oof_ptc(
    matrix: &FeatureMatrix,
    tc_labels: &[u8],
    plan: &FoldPlan,
    config: &LearnerConfig,
    mode: PtcMode,
) -> Result<PtcVector> {
    let n = matrix.n_rows();
    if tc_labels.len() != n || plan.n_rows() != n {
        return Err(Error::Pairing(format!(
            "matrix has {n} rows, labels {}, plan {}",
            tc_labels.len(),
            plan.n_rows()
        )));
    }
    let k = plan.k;
    let outer: Vec<(Vec<f64>, String)> = (0..k)
        .into_par_iter()
        .map(|f| -> Result<(Vec<f64>, String)> {
            let (inner_train, inner_valid) = &plan.inner_split[f];
            let cfg = seeded(config, "stage1", f as u64);
            let fitted = fit_scaled(matrix, tc_labels, inner_train, inner_valid, &cfg);
            let (model, scaled) = fitted.map_err(|e| e.in_fold(f))?;
            let p = predict_proba(&model, &scaled.select_rows(&plan.held_out(f)))?;
            Ok((p, sha256_hex(model.to_json()?.as_bytes())))
        })
        .collect::<Result<_>>()?;
    let mut values = vec![0.0; n];
    for (f, (p, _)) in outer.iter().enumerate() {
        for (&i, &v) in plan.held_out(f).iter().zip(p) {
            values[i] = v;
        }
    }
    let fold_training: Vec<Vec<f64>> = match mode {
        PtcMode::Concatenated => (0..k)
            .map(|f| plan.training(f).iter().map(|&i| values[i]).collect())
            .collect(),
        PtcMode::Nested => {
            let pairs: Vec<(usize, usize)> = (0..k)
                .flat_map(|f| (0..k).filter(move |&g| g != f).map(move |g| (f, g)))
                .collect();
            let scored: Vec<Vec<(usize, f64)>> = pairs
                .par_iter()
                .map(|&(f, g)| -> Result<Vec<(usize, f64)>> {
                    let train: Vec<usize> = (0..n).filter(|&i| plan.fold_of[i] != f && plan.fold_of[i] != g).collect();
                    let sub = pick(tc_labels, &train);
                    let index = (f * k + g) as u64;
                    let (tr, va) = stratified_split(
                        &sub,
                        1.0 - plan.inner_fraction,
                        derive_seed(plan.seed, "nested_inner_split", index),
                    )
                    .map_err(|e| e.in_fold(f))?;
                    let tr: Vec<usize> = tr.iter().map(|&j| train[j]).collect();
                    let va: Vec<usize> = va.iter().map(|&j| train[j]).collect();
                    let cfg = seeded(config, "stage1_nested", index);
                    let fitted = fit_scaled(matrix, tc_labels, &tr, &va, &cfg);
                    let (model, scaled) = fitted.map_err(|e| e.in_fold(f))?;
                    let rows = plan.held_out(g);
                    let p = predict_proba(&model, &scaled.select_rows(&rows))?;
                    Ok(rows.into_iter().zip(p).collect())
                })
                .collect::<Result<_>>()?;
            let mut per_fold = vec![vec![f64::NAN; n]; k];
            for (&(f, _), cells) in pairs.iter().zip(scored) {
                for (i, v) in cells {
                    per_fold[f][i] = v;
                }
            }
            (0..k)
                .map(|f| plan.training(f).iter().map(|&i| per_fold[f][i]).collect())
                .collect()
        }
    };
    Ok(PtcVector {
        stage1_auc: roc_auc(&values, tc_labels)?,
        values,
        mode,
        fold_training,
        fold_model_digests: outer.into_iter().map(|(_, d)| d).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage2Settings {
    pub learner: LearnerConfig,
    pub calibration: CalibrationMethod,
    pub beta: f64,
}

/// PTC column as seen by fold `f`: training rows from the fold's own
/// cross-fit, held-out rows from the outer vector.
fn fold_ptc_column(ptc: &PtcVector, plan: &FoldPlan, f: usize) -> Vec<Option<f64>> {
    let mut cells: Vec<Option<f64>> = ptc.values.iter().map(|&v| Some(v)).collect();
    for (&i, &v) in plan.training(f).iter().zip(&ptc.fold_training[f]) {
        cells[i] = Some(v);
    }
    cells
}

fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

fn fit_stage2_fold(
    matrix: &FeatureMatrix,
    ptc: Option<&PtcVector>,
    ec_labels: &[u8],
    plan: &FoldPlan,
    settings: &Stage2Settings,
    f: usize,
) -> Result<FoldReport> {
    let m = match ptc {
        Some(p) => matrix.with_column(Column::new(PTC_COLUMN), &fold_ptc_column(p, plan, f))?,
        None => matrix.clone(),
    };
    let (inner_train, inner_valid) = &plan.inner_split[f];
    let cfg = seeded(&settings.learner, "stage2", f as u64);
    let (model, scaled) = fit_scaled(&m, ec_labels, inner_train, inner_valid, &cfg)?;
    let valid_raw = predict_proba(&model, &scaled.select_rows(inner_valid))?;
    let valid_labels = pick(ec_labels, inner_valid);
    let calibrator = fit_calibrator(&valid_raw, &valid_labels, settings.calibration)?;
    let threshold = select_threshold(&calibrator.apply_all(&valid_raw), &valid_labels, settings.beta)?;
    let held_out = plan.held_out(f);
    let raw = predict_proba(&model, &scaled.select_rows(&held_out))?;
    let calibrated = calibrator.apply_all(&raw);
    let counts = confusion_at(&calibrated, &pick(ec_labels, &held_out), threshold);
    Ok(FoldReport {
        fold: f,
        fbeta: classification_bundle(counts, settings.beta)?.fbeta,
        calibrated,
        held_out,
        raw,
        threshold,
        best_iteration: model.best_iteration(),
        calibrator,
        model_digest: sha256_hex(model.to_json()?.as_bytes()),
    })
}

/// Cross-validated stage 2.
///
/// Per fold: scale on inner-train, append PTC (unscaled) when given, fit
/// with early stopping on inner-valid, calibrate and pick the F-beta
/// threshold on inner-valid, then score the held-out rows.
pub fn run_stage2(
    matrix: &FeatureMatrix,
    ptc: Option<&PtcVector>,
    ec_labels: &[u8],
    plan: &FoldPlan,
    settings: &Stage2Settings,
) -> Result<CvReport> {
    let n = matrix.n_rows();
    if ec_labels.len() != n || plan.n_rows() != n {
        return Err(Error::Pairing(format!(
            "matrix has {n} rows, labels {}, plan {}",
            ec_labels.len(),
            plan.n_rows()
        )));
    }
    if let Some(p) = ptc {
        if p.values.len() != n || p.fold_training.len() != plan.k {
            return Err(Error::Pairing("PTC vector does not match the fold plan".into()));
        }
        for f in 0..plan.k {
            if p.fold_training[f].len() != plan.training(f).len() {
                return Err(Error::Pairing(format!("fold {f}: PTC training values do not match the plan")));
            }
        }
    }
    let folds: Vec<FoldReport> = (0..plan.k)
        .into_par_iter()
        .map(|f| fit_stage2_fold(matrix, ptc, ec_labels, plan, settings, f).map_err(|e| e.in_fold(f)))
        .collect::<Result<_>>()?;
    let mut oof_raw = vec![0.0; n];
    let mut oof_calibrated = vec![0.0; n];
    let mut decisions = vec![false; n];
    for fr in &folds {
        for (j, &i) in fr.held_out.iter().enumerate() {
            oof_raw[i] = fr.raw[j];
            oof_calibrated[i] = fr.calibrated[j];
            decisions[i] = fr.calibrated[j] >= fr.threshold;
        }
    }
    let thresholds: Vec<f64> = folds.iter().map(|f| f.threshold).collect();
    Ok(CvReport {
        name: if ptc.is_some() { "stage2_with_ptc" } else { "stage2_without_ptc" }.into(),
        uses_ptc: ptc.is_some(),
        k: plan.k,
        beta: settings.beta,
        labels: ec_labels.to_vec(),
        metrics: MetricBundle::from_decisions(&oof_calibrated, ec_labels, &decisions)?,
        threshold_mean: thresholds.iter().sum::<f64>() / thresholds.len() as f64,
        threshold_sd: sample_sd(&thresholds),
        mean_fold_fbeta: folds.iter().map(|f| f.fbeta).sum::<f64>() / folds.len() as f64,
        global_threshold: select_threshold(&oof_calibrated, ec_labels, settings.beta)?,
        stage1_auc: ptc.map(|p| p.stage1_auc),
        folds,
        oof_raw,
        oof_calibrated,
    })
}

/// Index of the report with the highest mean fold F-beta; the first wins
/// ties.
pub fn select_by_mean_fbeta(reports: &[CvReport]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, r) in reports.iter().enumerate() {
        if best.is_none_or(|b| r.mean_fold_fbeta > reports[b].mean_fold_fbeta) {
            best = Some(i);
        }
    }
    best
}
