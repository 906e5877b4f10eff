use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trees::sigmoid;

/// Requested calibration method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMethod {
    Platt,
    Isotonic,
}

/// Fitted probability calibrator.
///
/// The isotonic map interpolates linearly between its knots and is flat
/// beyond them. `SigmoidFallback` is a Platt fit used when an isotonic fit
/// was requested but failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Calibrator {
    Platt { slope: f64, offset: f64 },
    Isotonic { x: Vec<f64>, y: Vec<f64> },
    SigmoidFallback { slope: f64, offset: f64, reason: String },
}

impl Calibrator {
    pub fn method_name(&self) -> &'static str {
        match self {
            Calibrator::Platt { .. } => "platt",
            Calibrator::Isotonic { .. } => "isotonic",
            Calibrator::SigmoidFallback { .. } => "sigmoid_fallback",
        }
    }

    pub fn apply(&self, raw: f64) -> f64 {
        let p = match self {
            Calibrator::Platt { slope, offset } | Calibrator::SigmoidFallback { slope, offset, .. } => {
                sigmoid(slope * raw + offset)
            }
            Calibrator::Isotonic { x, y } => {
                let i = x.partition_point(|&k| k < raw);
                if i == 0 {
                    y[0]
                } else if i == x.len() {
                    y[x.len() - 1]
                } else if x[i] == raw {
                    y[i]
                } else {
                    let t = (raw - x[i - 1]) / (x[i] - x[i - 1]);
                    y[i - 1] + t * (y[i] - y[i - 1])
                }
            }
        };
        p.clamp(0.0, 1.0)
    }

    pub fn apply_all(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter().map(|&r| self.apply(r)).collect()
    }
}

/// Platt's sigmoid fit with smoothed targets, returning `(slope, offset)` of
/// `sigmoid(slope * s + offset)`. Newton iterations with backtracking.
fn platt(scores: &[f64], labels: &[u8]) -> (f64, f64) {
    let prior1 = labels.iter().filter(|&&y| y == 1).count() as f64;
    let prior0 = labels.len() as f64 - prior1;
    let hi = (prior1 + 1.0) / (prior1 + 2.0);
    let lo = 1.0 / (prior0 + 2.0);
    let targets: Vec<f64> = labels.iter().map(|&y| if y == 1 { hi } else { lo }).collect();
    let objective = |a: f64, b: f64| -> f64 {
        scores
            .iter()
            .zip(&targets)
            .map(|(&f, &t)| {
                let z = f * a + b;
                if z >= 0.0 {
                    t * z + (-z).exp().ln_1p()
                } else {
                    (t - 1.0) * z + z.exp().ln_1p()
                }
            })
            .sum()
    };
    // P(y = 1 | f) = 1 / (1 + exp(a f + b))
    let mut a = 0.0;
    let mut b = ((prior0 + 1.0) / (prior1 + 1.0)).ln();
    let mut fval = objective(a, b);
    for _ in 0..100 {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (1e-12, 1e-12, 0.0, 0.0, 0.0);
        for (&f, &t) in scores.iter().zip(&targets) {
            let z = f * a + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = t - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= 1e-10 {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < 1e-10 {
            break;
        }
    }
    (-a, -b)
}

/// Pool-adjacent-violators fit. Returns the distinct sorted scores and the
/// fitted non-decreasing value at each.
pub fn isotonic_knots(scores: &[f64], labels: &[u8]) -> (Vec<f64>, Vec<f64>) {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]));
    // (x, label sum, count) per distinct score
    let mut groups: Vec<(f64, f64, f64)> = Vec::new();
    for i in order {
        match groups.last_mut() {
            Some(g) if g.0 == scores[i] => {
                g.1 += f64::from(labels[i]);
                g.2 += 1.0;
            }
            _ => groups.push((scores[i], f64::from(labels[i]), 1.0)),
        }
    }
    // blocks of (sum, weight, group count)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::new();
    for g in &groups {
        blocks.push((g.1, g.2, 1));
        while blocks.len() >= 2 {
            let (s2, w2, n2) = blocks[blocks.len() - 1];
            let (s1, w1, n1) = blocks[blocks.len() - 2];
            if s1 / w1 <= s2 / w2 {
                break;
            }
            blocks.pop();
            *blocks.last_mut().unwrap() = (s1 + s2, w1 + w2, n1 + n2);
        }
    }
    let x = groups.iter().map(|g| g.0).collect();
    let y = blocks
        .iter()
        .flat_map(|&(s, w, n)| std::iter::repeat_n(s / w, n))
        .collect();
    (x, y)
}

/// Isotonic fitted value for every input score.
pub fn isotonic_fit(scores: &[f64], labels: &[u8]) -> Vec<f64> {
    let (x, y) = isotonic_knots(scores, labels);
    scores
        .iter()
        .map(|s| y[x.partition_point(|k| k < s)])
        .collect()
}

/// Fit a calibrator mapping raw scores to probabilities.
///
/// An isotonic request falls back to a Platt fit when the labels hold one
/// class, the scores fewer than two distinct values, or the fitted map is
/// constant.
pub fn fit_calibrator(raw: &[f64], labels: &[u8], method: CalibrationMethod) -> Result<Calibrator> {
    if raw.len() != labels.len() {
        return Err(Error::Parameter(format!(
            "{} scores for {} labels",
            raw.len(),
            labels.len()
        )));
    }
    if raw.len() < 2 {
        return Err(Error::Parameter("calibration needs at least two samples".into()));
    }
    if raw.iter().any(|s| !s.is_finite()) {
        return Err(Error::Parameter("non-finite score".into()));
    }
    match method {
        CalibrationMethod::Platt => {
            let (slope, offset) = platt(raw, labels);
            Ok(Calibrator::Platt { slope, offset })
        }
        CalibrationMethod::Isotonic => {
            let pos = labels.iter().filter(|&&y| y == 1).count();
            let failure = if pos == 0 || pos == labels.len() {
                Some("single-class labels")
            } else {
                None
            };
            let (x, y) = isotonic_knots(raw, labels);
            let failure = failure.or_else(|| {
                if x.len() < 2 {
                    Some("fewer than two distinct scores")
                } else if y.first() == y.last() {
                    Some("constant fitted map")
                } else {
                    None
                }
            });
            match failure {
                None => Ok(Calibrator::Isotonic { x, y }),
                Some(reason) => {
                    let (slope, offset) = platt(raw, labels);
                    Ok(Calibrator::SigmoidFallback {
                        slope,
                        offset,
                        reason: reason.into(),
                    })
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::roc_auc;
    use proptest::prelude::*;

    #[test]
    fn pav_example() {
        assert_eq!(isotonic_fit(&[1.0, 2.0, 3.0], &[0, 1, 0]), vec![0.0, 0.5, 0.5]);
    }

    #[test]
    fn pav_fixed_point() {
        let scores = [0.0, 0.5, 1.0];
        let labels = [0, 0, 1, 1, 1, 1];
        let s6 = [0.0, 0.5, 0.5, 1.0, 1.0, 1.0];
        let (x, y) = isotonic_knots(&s6, &labels);
        assert_eq!(x, scores);
        assert_eq!(y, vec![0.0, 0.5, 1.0]);
        let c = fit_calibrator(&s6, &labels, CalibrationMethod::Isotonic).unwrap();
        for s in scores {
            assert_eq!(c.apply(s), s);
        }
    }

    #[test]
    fn single_class_falls_back() {
        let c = fit_calibrator(&[0.1, 0.4, 0.8], &[0, 0, 0], CalibrationMethod::Isotonic).unwrap();
        assert_eq!(c.method_name(), "sigmoid_fallback");
        assert!(c.apply(0.5) < 0.5);
        let c = fit_calibrator(&[0.3, 0.3, 0.3], &[0, 1, 0], CalibrationMethod::Isotonic).unwrap();
        assert_eq!(c.method_name(), "sigmoid_fallback");
        assert!(fit_calibrator(&[0.1], &[0, 1], CalibrationMethod::Platt).is_err());
    }

    #[test]
    fn platt_recovers_sigmoid() {
        // scores whose empirical positive rate follows sigmoid(4s - 2)
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for i in 0..=20 {
            let s = i as f64 / 20.0;
            let pos = (sigmoid(4.0 * s - 2.0) * 1000.0).round() as usize;
            for j in 0..1000 {
                scores.push(s);
                labels.push(u8::from(j < pos));
            }
        }
        let Calibrator::Platt { slope, offset } = fit_calibrator(&scores, &labels, CalibrationMethod::Platt).unwrap() else {
            panic!()
        };
        assert!((slope - 4.0).abs() < 0.05 && (offset + 2.0).abs() < 0.05, "{slope} {offset}");
    }

    #[test]
    fn strictly_increasing_calibration_keeps_auc() {
        let scores: Vec<f64> = (0..40).map(|i| i as f64 / 40.0).collect();
        let labels: Vec<u8> = (0..40).map(|i| u8::from((i * 7) % 10 < i / 4)).collect();
        let c = fit_calibrator(&scores, &labels, CalibrationMethod::Platt).unwrap();
        let cal = c.apply_all(&scores);
        assert!(cal.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(roc_auc(&cal, &labels).unwrap(), roc_auc(&scores, &labels).unwrap());
    }

    proptest! {
        #[test]
        fn isotonic_is_monotone(pairs in prop::collection::vec((0u8..20, 0u8..2), 2..60)) {
            let scores: Vec<f64> = pairs.iter().map(|p| p.0 as f64 / 20.0).collect();
            let labels: Vec<u8> = pairs.iter().map(|p| p.1).collect();
            let c = fit_calibrator(&scores, &labels, CalibrationMethod::Isotonic).unwrap();
            let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
            let out = c.apply_all(&grid);
            if c.method_name() == "isotonic" {
                prop_assert!(out.windows(2).all(|w| w[0] <= w[1] + 1e-15));
            }
            prop_assert!(out.iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }
}
