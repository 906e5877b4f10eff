use serde::{Deserialize, Serialize};

use super::calibrate::{fit_calibrator, CalibrationMethod, Calibrator};
use super::folds::plan_folds;
use super::scaler::{fit_fold_scaler, Scaler};
use super::stages::{generate_oof_ptc, run_stage2, CvReport, PtcMode, PtcVector, Stage2Settings};
use super::threshold::select_threshold;
use crate::error::{Error, Result};
use crate::records::{stratified_split, Column, FeatureMatrix, PTC_COLUMN};
use crate::rng::derive_seed;
use crate::trees::{fit_model, predict_proba, LearnerConfig, Model};

pub const PIPELINE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub stage1: LearnerConfig,
    pub stage2: LearnerConfig,
    pub k: usize,
    pub inner_fraction: f64,
    pub beta: f64,
    pub calibration: CalibrationMethod,
    pub ptc_mode: PtcMode,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            stage1: LearnerConfig::leafwise(),
            stage2: LearnerConfig::depthwise(),
            k: 5,
            inner_fraction: 0.85,
            beta: 2.0,
            calibration: CalibrationMethod::Isotonic,
            ptc_mode: PtcMode::Nested,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    /// Stage-1 learner with its seed folded into the pipeline seed.
    pub fn stage1_learner(&self) -> LearnerConfig {
        LearnerConfig {
            seed: derive_seed(self.seed, "stage1_learner", self.stage1.seed),
            ..self.stage1.clone()
        }
    }

    pub fn stage2_settings(&self) -> Stage2Settings {
        Stage2Settings {
            learner: LearnerConfig {
                seed: derive_seed(self.seed, "stage2_learner", self.stage2.seed),
                ..self.stage2.clone()
            },
            calibration: self.calibration,
            beta: self.beta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.stage1.validate()?;
        self.stage2.validate()?;
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Parameter(format!("beta must be positive, got {}", self.beta)));
        }
        Ok(())
    }
}

/// The deployable two-stage model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineModel {
    pub format_version: u32,
    /// Input feature columns, without PTC.
    pub feature_names: Vec<String>,
    pub scaler: Scaler,
    pub stage1: Model,
    pub stage2: Model,
    pub calibrator: Calibrator,
    pub t_star: f64,
    pub beta: f64,
    pub config: PipelineConfig,
}

impl PipelineModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: PipelineModel = serde_json::from_str(text)?;
        if model.format_version != PIPELINE_FORMAT_VERSION {
            return Err(Error::UnsupportedModel(format!(
                "pipeline format version {} (expected {PIPELINE_FORMAT_VERSION})",
                model.format_version
            )));
        }
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub ptc: f64,
    pub probability: f64,
    pub decision: bool,
}

/// Everything produced by a training run.
#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub model: PipelineModel,
    pub report: CvReport,
    pub ptc: PtcVector,
}

fn fit_with_holdout(
    matrix: &FeatureMatrix,
    labels: &[u8],
    config: &LearnerConfig,
    inner_fraction: f64,
    seed: u64,
) -> Result<Model> {
    let (tr, va) = stratified_split(labels, 1.0 - inner_fraction, seed)?;
    let pick = |rows: &[usize]| rows.iter().map(|&i| labels[i]).collect::<Vec<u8>>();
    let va_labels = pick(&va);
    fit_model(
        config,
        &matrix.select_rows(&tr),
        &pick(&tr),
        Some((&matrix.select_rows(&va), &va_labels)),
    )
}

/// Cross-validate the two-stage procedure and refit it on all rows.
///
/// Stage 1 is refit on every row; stage 2 is refit on every row with the
/// out-of-fold PTC as its PTC column. Both refits hold out an inner split for
/// early stopping only. The calibrator and `t_star` come from the pooled
/// out-of-fold stage-2 scores.
pub fn train_pipeline(
    matrix: &FeatureMatrix,
    tc_labels: &[u8],
    ec_labels: &[u8],
    config: &PipelineConfig,
) -> Result<TrainingRun> {
    config.validate()?;
    let n = matrix.n_rows();
    if tc_labels.len() != n || ec_labels.len() != n {
        return Err(Error::Parameter(format!(
            "{n} rows but {} TC and {} EC labels",
            tc_labels.len(),
            ec_labels.len()
        )));
    }
    if matrix.column_index(PTC_COLUMN).is_some() {
        return Err(Error::Schema(format!("input already has a '{PTC_COLUMN}' column")));
    }
    let plan = plan_folds(ec_labels, config.k, config.inner_fraction, config.seed)?;
    let stage1_cfg = config.stage1_learner();
    let settings = config.stage2_settings();
    let ptc = generate_oof_ptc(matrix, tc_labels, &plan, &stage1_cfg, config.ptc_mode)?;
    let report = run_stage2(matrix, Some(&ptc), ec_labels, &plan, &settings)?;

    let all: Vec<usize> = (0..n).collect();
    let scaler = fit_fold_scaler(matrix, &all);
    let scaled = scaler.transform(matrix)?;
    let stage1 = fit_with_holdout(
        &scaled,
        tc_labels,
        &stage1_cfg,
        config.inner_fraction,
        derive_seed(config.seed, "final_stage1_split", 0),
    )?;
    let ptc_cells: Vec<Option<f64>> = ptc.values.iter().map(|&v| Some(v)).collect();
    let with_ptc = scaled.with_column(Column::new(PTC_COLUMN), &ptc_cells)?;
    let stage2 = fit_with_holdout(
        &with_ptc,
        ec_labels,
        &settings.learner,
        config.inner_fraction,
        derive_seed(config.seed, "final_stage2_split", 0),
    )?;
    let calibrator = fit_calibrator(&report.oof_raw, ec_labels, config.calibration)?;
    let t_star = select_threshold(&calibrator.apply_all(&report.oof_raw), ec_labels, config.beta)?;
    let model = PipelineModel {
        format_version: PIPELINE_FORMAT_VERSION,
        feature_names: matrix.column_names(),
        scaler,
        stage1,
        stage2,
        calibrator,
        t_star,
        beta: config.beta,
        config: config.clone(),
    };
    Ok(TrainingRun { model, report, ptc })
}

pub fn finalize_pipeline(
    matrix: &FeatureMatrix,
    tc_labels: &[u8],
    ec_labels: &[u8],
    config: &PipelineConfig,
) -> Result<PipelineModel> {
    Ok(train_pipeline(matrix, tc_labels, ec_labels, config)?.model)
}

/// Scale, score stage 1, append PTC, score stage 2, calibrate and threshold.
pub fn predict(model: &PipelineModel, matrix: &FeatureMatrix) -> Result<Vec<Prediction>> {
    let input = matrix.select_columns(&model.feature_names)?;
    let scaled = model.scaler.transform(&input)?;
    let ptc = predict_proba(&model.stage1, &scaled)?;
    let cells: Vec<Option<f64>> = ptc.iter().map(|&v| Some(v)).collect();
    let with_ptc = scaled.with_column(Column::new(PTC_COLUMN), &cells)?;
    let raw = predict_proba(&model.stage2, &with_ptc)?;
    Ok(ptc
        .into_iter()
        .zip(raw)
        .map(|(ptc, r)| {
            let probability = model.calibrator.apply(r);
            Prediction {
                ptc,
                probability,
                decision: probability >= model.t_star,
            }
        })
        .collect())
}
