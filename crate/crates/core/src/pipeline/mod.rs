//! The two-stage procedure: fold planning, per-fold scaling, out-of-fold
//! stage-1 probabilities (PTC), stage-2 training with PTC as a feature,
//! calibration, threshold selection, final refit and prediction.

mod calibrate;
mod finalize;
mod folds;
mod scaler;
mod stages;
mod threshold;

pub use calibrate::{fit_calibrator, isotonic_fit, isotonic_knots, CalibrationMethod, Calibrator};
pub use finalize::{
    finalize_pipeline, predict, train_pipeline, PipelineConfig, PipelineModel, Prediction, TrainingRun,
    PIPELINE_FORMAT_VERSION,
};
pub use folds::{plan_folds, FoldPlan};
pub use scaler::{fit_fold_scaler, ScaledColumn, Scaler};
pub use stages::{generate_oof_ptc, run_stage2, select_by_mean_fbeta, CvReport, FoldReport, PtcMode, PtcVector, Stage2Settings};
pub use threshold::{select_threshold, select_threshold_scored};
