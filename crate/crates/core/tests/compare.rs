mod common;

use wqscreen::explain::mean_abs_shap;
use wqscreen::pipeline::{plan_folds, run_stage2, select_by_mean_fbeta, CalibrationMethod, CvReport, Stage2Settings};
use wqscreen::records::{Column, PTC_COLUMN};
use wqscreen::stats::{compare_models, DeltaMetric};
use wqscreen::trees::{fit_model, LearnerConfig, Model};
use wqscreen::Error;

fn settings(learner: LearnerConfig) -> Stage2Settings {
    Stage2Settings { learner: common::quick(learner), calibration: CalibrationMethod::Isotonic, beta: 2.0 }
}

fn reports(seed: u64) -> (CvReport, CvReport) {
    let (m, labels) = common::small(300, seed);
    let plan = plan_folds(&labels.ec, 5, 0.85, seed).unwrap();
    let a = run_stage2(&m, None, &labels.ec, &plan, &settings(LearnerConfig::depthwise())).unwrap();
    let mut b = run_stage2(&m, None, &labels.ec, &plan, &settings(LearnerConfig::leafwise())).unwrap();
    b.name = "leafwise".into();
    (a, b)
}

#[test]
fn clone_challenger_is_a_null_result() {
    let (a, _) = reports(1);
    let mut clone = a.clone();
    clone.name = "clone".into();
    let r = compare_models(&a, &[clone], 500, 3).unwrap();
    assert_eq!(r.deltas.len(), 2);
    for d in &r.deltas {
        assert_eq!((d.result.delta, d.result.ci_low, d.result.ci_high, d.result.p_value), (0.0, 0.0, 0.0, 1.0));
        assert_eq!(d.result.q_value, Some(1.0));
    }
    assert_eq!((r.mcnemar[0].b, r.mcnemar[0].c, r.mcnemar[0].p_value), (0, 0, 1.0));
}

#[test]
fn order_of_challengers_does_not_change_rows() {
    let (a, b) = reports(2);
    let mut c = a.clone();
    c.name = "clone".into();
    let one = compare_models(&a, &[b.clone(), c.clone()], 300, 4).unwrap();
    let two = compare_models(&a, &[c, b], 300, 4).unwrap();
    for row in &one.deltas {
        let other = two
            .deltas
            .iter()
            .find(|r| r.challenger == row.challenger && r.result.metric == row.result.metric)
            .unwrap();
        assert_eq!(row, other);
    }
    assert_eq!(compare_models(&a, &[a.clone()], 300, 4).unwrap(), compare_models(&a, &[a.clone()], 300, 4).unwrap());
    let mut csv = Vec::new();
    one.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("challenger,metric,delta,ci_low,ci_high,p,q,significant_at_0.05\n"));
    assert_eq!(text.lines().count(), 1 + 2 * DeltaMetric::ALL.len() + 2);
}

#[test]
fn mismatched_folds_are_rejected_by_name() {
    let (a, _) = reports(3);
    let (m, labels) = common::small(300, 3);
    let plan = plan_folds(&labels.ec, 5, 0.85, 99).unwrap();
    let other = run_stage2(&m, None, &labels.ec, &plan, &settings(LearnerConfig::depthwise())).unwrap();
    match compare_models(&a, &[other], 100, 0) {
        Err(Error::Pairing(msg)) => assert!(msg.contains("fold 0"), "{msg}"),
        other => panic!("{other:?}"),
    }
    assert!(matches!(compare_models(&a, &[], 100, 0), Err(Error::EmptyInput(_))));
}

#[test]
fn selection_uses_mean_fold_fbeta() {
    let (a, b) = reports(4);
    let pick = select_by_mean_fbeta(&[a.clone(), b.clone()]).unwrap();
    let best = if b.mean_fold_fbeta > a.mean_fold_fbeta { 1 } else { 0 };
    assert_eq!(pick, best);
    assert_eq!(select_by_mean_fbeta(&[a.clone(), a]), Some(0));
    assert_eq!(select_by_mean_fbeta(&[]), None);
}

#[test]
fn an_oracle_ptc_dominates_attributions() {
    let (m, labels) = common::small(400, 5);
    let ptc: Vec<Option<f64>> = labels.ec.iter().map(|&y| Some(f64::from(y))).collect();
    let with = m.with_column(Column::new(PTC_COLUMN), &ptc).unwrap();
    let cfg = LearnerConfig { early_stopping_rounds: 0, iteration_cap: 40, ..LearnerConfig::depthwise() };
    let Model::Ensemble(model) = fit_model(&cfg, &with, &labels.ec, None).unwrap() else { panic!() };
    let ranked = mean_abs_shap(&model, &with).unwrap();
    assert_eq!(ranked[0].0, PTC_COLUMN);
    assert!(ranked.windows(2).all(|w| w[0].1 >= w[1].1));
}
