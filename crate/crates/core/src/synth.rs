//! Synthetic survey data with a controllable total-coliform to E. coli
//! coupling.
//!
//! A standard-normal latent contamination score drives total coliforms (the
//! top `tc_prevalence` share of latents are positive), the physicochemical
//! readings and a mild tilt of the contextual answers. E. coli is drawn from
//! its two conditional rates given total coliforms.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::records::{write_records, Categorical, DatasetOrigin, FieldRecord, Measurement, SurveyKind};
use crate::rng::rng_for;

/// How a measurement is derived from its standardized draw `u`.
#[derive(Debug, Clone, Copy)]
enum Shape {
    /// `centre + spread * u`
    Linear { centre: f64, spread: f64 },
    /// `centre * exp(spread * u)`, right-skewed
    LogNormal { centre: f64, spread: f64 },
}

fn measurement_profile(m: Measurement) -> (Shape, f64, u32) {
    // (shape, default signal, decimals)
    match m {
        Measurement::Turbidity => (Shape::LogNormal { centre: 2.0, spread: 0.6 }, 1.2, 2),
        Measurement::Tds => (Shape::LogNormal { centre: 300.0, spread: 0.4 }, 0.7, 1),
        Measurement::Conductivity => (Shape::LogNormal { centre: 460.0, spread: 0.4 }, 0.7, 1),
        Measurement::Ph => (Shape::Linear { centre: 7.2, spread: 0.35 }, -0.5, 2),
        Measurement::Orp => (Shape::Linear { centre: 250.0, spread: 60.0 }, -1.0, 1),
        Measurement::Hardness => (Shape::Linear { centre: 150.0, spread: 40.0 }, 0.3, 1),
        Measurement::Alkalinity => (Shape::Linear { centre: 120.0, spread: 30.0 }, 0.2, 1),
    }
}

/// Levels with base frequency and a risk score in [-1, 1] that tilts the
/// level probabilities with the latent.
fn category_profile(c: Categorical) -> Vec<(&'static str, f64, f64)> {
    match c {
        Categorical::SourceType => vec![
            ("piped municipal", 0.45, -0.5),
            ("borewell", 0.25, 0.3),
            ("tanker", 0.2, 0.6),
            ("packaged can", 0.1, -0.8),
        ],
        Categorical::ContainerType => vec![("pot", 0.35, 0.4), ("drum", 0.3, 0.3), ("sump", 0.2, 0.5), ("can", 0.15, -0.5)],
        Categorical::ContainerMaterial => vec![("plastic", 0.6, 0.0), ("steel", 0.25, -0.3), ("clay", 0.15, 0.4)],
        Categorical::ContainerPlacement => vec![("floor", 0.5, 0.4), ("raised", 0.5, -0.4)],
        Categorical::StorageDuration => vec![("same day", 0.4, -0.5), ("1-2 days", 0.4, 0.2), ("over 2 days", 0.2, 0.7)],
        Categorical::Treatment => vec![
            ("none", 0.5, 0.6),
            ("boiling treatment", 0.3, -0.6),
            ("cloth filter", 0.2, 0.1),
        ],
        Categorical::EducationLevel => vec![("primary", 0.35, 0.2), ("secondary", 0.45, 0.0), ("tertiary", 0.2, -0.3)],
        Categorical::Sex => vec![("female", 0.6, 0.0), ("male", 0.4, 0.0)],
        Categorical::Perception => vec![("safe", 0.7, -0.1), ("unsafe", 0.3, 0.2)],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_rows: usize,
    pub tc_prevalence: f64,
    pub ec_given_tc1: f64,
    pub ec_given_tc0: f64,
    /// Effect of the latent on a column, in noise-SD units. Keys are
    /// measurement names or categorical field names; absent keys take the
    /// built-in defaults.
    pub feature_signal: BTreeMap<String, f64>,
    /// Multiplies every effect, default or explicit. 0 removes all signal.
    pub signal_scale: f64,
    /// Missing-cell probability per column; absent keys use
    /// `default_missing_rate`.
    pub missing_rate: BTreeMap<String, f64>,
    pub default_missing_rate: f64,
    /// Base level frequencies per categorical field, overriding the
    /// built-in ones (levels not listed keep a risk score of 0).
    pub category_frequencies: BTreeMap<String, BTreeMap<String, f64>>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_rows: 2207,
            tc_prevalence: 0.88,
            ec_given_tc1: 0.764,
            ec_given_tc0: 0.185,
            feature_signal: BTreeMap::new(),
            signal_scale: 1.0,
            missing_rate: BTreeMap::new(),
            default_missing_rate: 0.03,
            category_frequencies: BTreeMap::new(),
            seed: 0,
        }
    }
}

fn odds(p: f64) -> f64 {
    p / (1.0 - p)
}

impl SynthConfig {
    /// Odds ratio implied by the two conditional E. coli rates.
    pub fn implied_odds_ratio(&self) -> f64 {
        odds(self.ec_given_tc1) / odds(self.ec_given_tc0)
    }

    fn signal(&self, key: &str, default: f64) -> f64 {
        self.feature_signal.get(key).copied().unwrap_or(default) * self.signal_scale
    }

    fn missing(&self, key: &str) -> f64 {
        self.missing_rate.get(key).copied().unwrap_or(self.default_missing_rate)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_rows < 10 {
            return Err(Error::Parameter(format!("n_rows must be at least 10, got {}", self.n_rows)));
        }
        for (name, p) in [
            ("tc_prevalence", self.tc_prevalence),
            ("ec_given_tc1", self.ec_given_tc1),
            ("ec_given_tc0", self.ec_given_tc0),
        ] {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Parameter(format!("{name} must lie in (0, 1), got {p}")));
            }
        }
        let known = |k: &str| Measurement::from_name(k).is_some() || Categorical::from_name(k).is_some();
        for k in self.feature_signal.keys().chain(self.missing_rate.keys()).chain(self.category_frequencies.keys()) {
            if !known(k) {
                return Err(Error::Parameter(format!("unknown synthetic column '{k}'")));
            }
        }
        for (k, r) in &self.missing_rate {
            if !(0.0..1.0).contains(r) {
                return Err(Error::Parameter(format!("missing rate for '{k}' must lie in [0, 1), got {r}")));
            }
        }
        if !(0.0..1.0).contains(&self.default_missing_rate) {
            return Err(Error::Parameter("default_missing_rate must lie in [0, 1)".into()));
        }
        for (k, levels) in &self.category_frequencies {
            if levels.is_empty() || levels.values().any(|f| !(*f >= 0.0)) || levels.values().sum::<f64>() <= 0.0 {
                return Err(Error::Parameter(format!("frequencies for '{k}' must be non-negative with a positive sum")));
            }
        }
        if !self.signal_scale.is_finite() {
            return Err(Error::Parameter("signal_scale must be finite".into()));
        }
        Ok(())
    }
}

/// Ground truth behind a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub latents: Vec<f64>,
    pub tc: Vec<u8>,
    pub ec: Vec<u8>,
    pub implied_odds_ratio: f64,
    pub empirical_tc_prevalence: f64,
    pub empirical_ec_prevalence: f64,
    pub empirical_ec_given_tc1: f64,
    pub empirical_ec_given_tc0: f64,
    pub config: SynthConfig,
}

fn round_to(v: f64, decimals: u32) -> f64 {
    let s = 10f64.powi(decimals as i32);
    (v * s).round() / s
}

fn draw_level(rng: &mut impl Rng, levels: &[(String, f64, f64)], tilt: f64) -> String {
    let weights: Vec<f64> = levels.iter().map(|(_, f, risk)| f * (tilt * risk).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for ((name, _, _), w) in levels.iter().zip(&weights) {
        if u < *w {
            return name.clone();
        }
        u -= w;
    }
    levels.last().unwrap().0.clone()
}

/// Generate `config.n_rows` household records and their ground truth.
pub fn generate(config: &SynthConfig) -> Result<(Vec<FieldRecord>, SynthTruth)> {
    config.validate()?;
    let n = config.n_rows;
    let seed = config.seed;
    let mut rng = rng_for(seed, "synth_latent", 0);
    let latents: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();

    let n_tc = ((n as f64 * config.tc_prevalence).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| latents[b].total_cmp(&latents[a]).then(a.cmp(&b)));
    let mut tc = vec![0u8; n];
    for &i in &order[..n_tc] {
        tc[i] = 1;
    }
    let mut rng = rng_for(seed, "synth_ec", 0);
    let ec: Vec<u8> = tc
        .iter()
        .map(|&t| {
            let p = if t == 1 { config.ec_given_tc1 } else { config.ec_given_tc0 };
            u8::from(rng.random::<f64>() < p)
        })
        .collect();

    let base_time = NaiveDate::from_ymd_opt(2024, 1, 8)
        .and_then(|d| d.and_hms_opt(9, 0, 0))
        .expect("valid date");
    let n_collectors = (n / 25).max(1);
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let z = latents[i];
        let mut rng = rng_for(seed, "synth_row", i as u64);
        let mut r = FieldRecord::new(format!("synth-{seed}-{i:05}"), SurveyKind::Household);
        r.sample_id = Some(format!("S{i:05}"));
        let collector = i % n_collectors;
        r.collector = Some(format!("C{collector:03}"));
        r.latitude = Some(round_to(13.08 + rng.random_range(-0.08..0.08), 6));
        r.longitude = Some(round_to(80.27 + rng.random_range(-0.08..0.08), 6));
        r.gps_accuracy_m = Some(round_to(rng.random_range(3.0..20.0), 1));
        let slot = (i / n_collectors) as i64;
        let started: NaiveDateTime = base_time
            + Duration::days(collector as i64 % 20)
            + Duration::minutes(25 * slot)
            + Duration::seconds(rng.random_range(0..600));
        r.started_at = Some(started);
        r.ended_at = Some(started + Duration::seconds(rng.random_range(240..900)));
        r.expected_photo_count = 3;
        r.photo_count = 3;
        for m in Measurement::ALL {
            let (shape, default_signal, decimals) = measurement_profile(m);
            let noise: f64 = StandardNormal.sample(&mut rng);
            let missing = rng.random::<f64>() < config.missing(m.name());
            let u = config.signal(m.name(), default_signal) * z + noise;
            let v = match shape {
                Shape::Linear { centre, spread } => centre + spread * u,
                Shape::LogNormal { centre, spread } => centre * (spread * u).exp(),
            };
            let v = match m {
                Measurement::Ph => v.clamp(3.5, 10.5),
                Measurement::Orp => v.clamp(-500.0, 900.0),
                _ => v.max(0.0),
            };
            r.measurements.set(m, (!missing).then(|| round_to(v, decimals)));
        }
        for c in Categorical::ALL {
            let levels: Vec<(String, f64, f64)> = match config.category_frequencies.get(c.name()) {
                Some(freqs) => {
                    let risk: BTreeMap<&str, f64> = category_profile(c).into_iter().map(|(l, _, k)| (l, k)).collect();
                    freqs
                        .iter()
                        .map(|(l, f)| (l.clone(), *f, risk.get(l.as_str()).copied().unwrap_or(0.0)))
                        .collect()
                }
                None => category_profile(c).into_iter().map(|(l, f, k)| (l.to_string(), f, k)).collect(),
            };
            let tilt = config.signal(c.name(), 0.6) * z;
            let level = draw_level(&mut rng, &levels, tilt);
            let missing = rng.random::<f64>() < config.missing(c.name());
            r.categories.set(c, (!missing).then_some(level));
        }
        r.children_under_5 = Some(rng.random_range(0..4));
        r.dataset_origin = if i * 5 < n * 3 { DatasetOrigin::Set1 } else { DatasetOrigin::Set2 };
        r.tc_present = Some(tc[i] == 1);
        r.ec_present = Some(ec[i] == 1);
        records.push(r);
    }

    let rate = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let ec_tc1 = tc.iter().zip(&ec).filter(|(&t, &e)| t == 1 && e == 1).count();
    let ec_tc0 = tc.iter().zip(&ec).filter(|(&t, &e)| t == 0 && e == 1).count();
    let truth = SynthTruth {
        implied_odds_ratio: config.implied_odds_ratio(),
        empirical_tc_prevalence: rate(n_tc, n),
        empirical_ec_prevalence: rate(ec.iter().filter(|&&e| e == 1).count(), n),
        empirical_ec_given_tc1: rate(ec_tc1, n_tc),
        empirical_ec_given_tc0: rate(ec_tc0, n - n_tc),
        latents,
        tc,
        ec,
        config: config.clone(),
    };
    Ok((records, truth))
}

/// Write records as a CSV fixture readable by `parse_records`.
pub fn write_fixture(records: &[FieldRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no records to write".into()));
    }
    let file = BufWriter::new(File::create(path)?);
    write_records(records, file)
}
