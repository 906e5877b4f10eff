//! Rule-based screening of incoming survey records with OK / REVIEW / ALERT
//! triage.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::records::{FieldRecord, PlausibilityBounds, SurveyKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QcDomain {
    RecordIntegrity,
    SampleId,
    Gps,
    Duration,
    Photos,
    Logic,
    Plausibility,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Review,
    Alert,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct QcRule {
    pub code: &'static str,
    pub domain: QcDomain,
    pub severity: Severity,
}

const fn rule(code: &'static str, domain: QcDomain, severity: Severity) -> QcRule {
    QcRule { code, domain, severity }
}

pub const MISSING_UUID: QcRule = rule("MISSING_UUID", QcDomain::RecordIntegrity, Severity::Alert);
pub const DUPLICATE_UUID: QcRule = rule("DUPLICATE_UUID", QcDomain::RecordIntegrity, Severity::Alert);
pub const MISSING_SAMPLE_ID: QcRule = rule("MISSING_SAMPLE_ID", QcDomain::SampleId, Severity::Alert);
pub const GPS_LOW_ACCURACY: QcRule = rule("GPS_LOW_ACCURACY", QcDomain::Gps, Severity::Review);
pub const GPS_MISSING: QcRule = rule("GPS_MISSING", QcDomain::Gps, Severity::Review);
pub const SPATIAL_CLUSTER: QcRule = rule("SPATIAL_CLUSTER", QcDomain::Gps, Severity::Review);
pub const DURATION_SHORT: QcRule = rule("DURATION_SHORT", QcDomain::Duration, Severity::Review);
pub const BATCH_FILLING: QcRule = rule("BATCH_FILLING", QcDomain::Duration, Severity::Review);
pub const PHOTOS_INCOMPLETE: QcRule = rule("PHOTOS_INCOMPLETE", QcDomain::Photos, Severity::Review);
pub const END_BEFORE_START: QcRule = rule("END_BEFORE_START", QcDomain::Logic, Severity::Alert);
pub const EC_WITHOUT_TC: QcRule = rule("EC_WITHOUT_TC", QcDomain::Logic, Severity::Review);
pub const OUT_OF_RANGE: QcRule = rule("OUT_OF_RANGE", QcDomain::Plausibility, Severity::Alert);

pub const RULES: [QcRule; 12] = [
    MISSING_UUID,
    DUPLICATE_UUID,
    MISSING_SAMPLE_ID,
    GPS_LOW_ACCURACY,
    GPS_MISSING,
    SPATIAL_CLUSTER,
    DURATION_SHORT,
    BATCH_FILLING,
    PHOTOS_INCOMPLETE,
    END_BEFORE_START,
    EC_WITHOUT_TC,
    OUT_OF_RANGE,
];

pub const GPS_ACCURACY_LIMIT_M: f64 = 30.0;
pub const HOUSEHOLD_MIN_SECONDS: i64 = 180;
pub const WATER_BODY_MIN_SECONDS: i64 = 60;

pub fn rule_by_code(code: &str) -> Option<QcRule> {
    RULES.iter().copied().find(|r| r.code == code)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Category {
    Ok,
    Review,
    Alert,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Ok => "OK",
            Category::Review => "REVIEW",
            Category::Alert => "ALERT",
        }
    }

    /// Triage for a set of triggered rule codes.
    pub fn of(triggered: &[String]) -> Category {
        let severities = triggered.iter().filter_map(|c| rule_by_code(c)).map(|r| r.severity);
        match severities.max() {
            Some(Severity::Alert) => Category::Alert,
            Some(Severity::Review) => Category::Review,
            None if triggered.is_empty() => Category::Ok,
            None => Category::Review,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QcVerdict {
    pub uuid: String,
    pub category: Category,
    pub triggered: Vec<String>,
}

impl QcVerdict {
    fn new(uuid: &str, triggered: Vec<String>) -> Self {
        QcVerdict {
            uuid: uuid.to_string(),
            category: Category::of(&triggered),
            triggered,
        }
    }

    fn add(&mut self, rule: QcRule) {
        if !self.triggered.iter().any(|c| c == rule.code) {
            self.triggered.push(rule.code.to_string());
            self.category = Category::of(&self.triggered);
        }
    }
}

/// Insert-only set of accepted uuids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UuidRegistry {
    seen: BTreeSet<String>,
}

impl UuidRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, uuid: &str) -> bool {
        self.seen.contains(uuid)
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }

    /// Insert a uuid; false when it was already present.
    pub fn register(&mut self, uuid: &str) -> Result<bool> {
        if uuid.is_empty() {
            return Err(Error::Parameter("cannot register an empty uuid".into()));
        }
        if self.seen.contains(uuid) {
            return Ok(false);
        }
        self.seen.insert(uuid.to_string());
        Ok(true)
    }
}

/// Per-record checks; updates `registry` with a novel uuid.
pub fn evaluate_record(record: &FieldRecord, registry: &mut UuidRegistry, bounds: &PlausibilityBounds) -> QcVerdict {
    let uuid = record.uuid.trim();
    let mut fired = Vec::new();
    if uuid.is_empty() {
        fired.push(MISSING_UUID);
    } else if !registry.register(uuid).expect("uuid is non-empty") {
        fired.push(DUPLICATE_UUID);
    }
    if record.sample_id.as_deref().is_none_or(|s| s.trim().is_empty()) {
        fired.push(MISSING_SAMPLE_ID);
    }
    if record.gps_accuracy_m.is_some_and(|a| a > GPS_ACCURACY_LIMIT_M) {
        fired.push(GPS_LOW_ACCURACY);
    }
    if record.latitude.is_none() || record.longitude.is_none() {
        fired.push(GPS_MISSING);
    }
    if let Some(d) = record.duration_seconds() {
        let minimum = match record.survey_kind {
            SurveyKind::Household => HOUSEHOLD_MIN_SECONDS,
            SurveyKind::WaterBody => WATER_BODY_MIN_SECONDS,
        };
        if d < 0 {
            fired.push(END_BEFORE_START);
        } else if d < minimum {
            fired.push(DURATION_SHORT);
        }
    }
    if record.photo_count < record.expected_photo_count {
        fired.push(PHOTOS_INCOMPLETE);
    }
    if record.ec_present == Some(true) && record.tc_present == Some(false) {
        fired.push(EC_WITHOUT_TC);
    }
    if !bounds.violations(record).is_empty() {
        fired.push(OUT_OF_RANGE);
    }
    QcVerdict::new(uuid, fired.into_iter().map(|r| r.code.to_string()).collect())
}

/// Thresholds for the batch-level rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatchConfig {
    pub batch_min: usize,
    pub batch_gap_s: f64,
    pub cluster_min: usize,
    pub cluster_radius_m: f64,
}

impl Default for BatchConfig {
    fn default() -> Self {
        BatchConfig {
            batch_min: 5,
            batch_gap_s: 60.0,
            cluster_min: 5,
            cluster_radius_m: 10.0,
        }
    }
}

impl BatchConfig {
    /// A configuration under which no batch rule can fire.
    pub fn disabled() -> Self {
        BatchConfig {
            batch_min: usize::MAX,
            batch_gap_s: 0.0,
            cluster_min: usize::MAX,
            cluster_radius_m: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_min < 2 || self.cluster_min < 2 {
            return Err(Error::Parameter("batch_min and cluster_min must be at least 2".into()));
        }
        if !(self.batch_gap_s >= 0.0 && self.cluster_radius_m >= 0.0) {
            return Err(Error::Parameter("batch_gap_s and cluster_radius_m must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchFlags {
    /// Records carrying each rule code.
    pub rule_counts: BTreeMap<String, usize>,
    pub category_counts: BTreeMap<Category, usize>,
}

impl BatchFlags {
    pub fn any_alert(&self) -> bool {
        self.category_counts.get(&Category::Alert).is_some_and(|&n| n > 0)
    }
}

/// Rows in runs of at least `batch_min` submissions by one collector with
/// every gap below `batch_gap_s`.
fn batch_filling_rows(records: &[FieldRecord], config: &BatchConfig) -> BTreeSet<usize> {
    let mut by_collector: BTreeMap<&str, Vec<(chrono::NaiveDateTime, usize)>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        if let (Some(c), Some(t)) = (r.collector.as_deref(), r.submitted_at()) {
            by_collector.entry(c).or_default().push((t, i));
        }
    }
    let mut flagged = BTreeSet::new();
    for mut subs in by_collector.into_values() {
        subs.sort();
        let mut start = 0;
        for end in 1..=subs.len() {
            let breaks = end == subs.len()
                || ((subs[end].0 - subs[end - 1].0).num_milliseconds() as f64) >= config.batch_gap_s * 1000.0;
            if breaks {
                if end - start >= config.batch_min {
                    flagged.extend(subs[start..end].iter().map(|s| s.1));
                }
                start = end;
            }
        }
    }
    flagged
}

const EARTH_RADIUS_M: f64 = 6_371_008.8;

pub fn haversine_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * a.sqrt().min(1.0).asin()
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Household rows in single-linkage groups of at least `cluster_min` within
/// `cluster_radius_m`.
fn spatial_cluster_rows(records: &[FieldRecord], config: &BatchConfig) -> BTreeSet<usize> {
    let mut points: Vec<(f64, f64, usize)> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.survey_kind == SurveyKind::Household)
        .filter_map(|(i, r)| Some((r.latitude?, r.longitude?, i)))
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
    let lat_window = config.cluster_radius_m / EARTH_RADIUS_M * (180.0 / std::f64::consts::PI);
    let mut parent: Vec<usize> = (0..points.len()).collect();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if points[j].0 - points[i].0 > lat_window {
                break;
            }
            if haversine_m(points[i].0, points[i].1, points[j].0, points[j].1) <= config.cluster_radius_m {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..points.len() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(points[i].2);
    }
    groups
        .into_values()
        .filter(|g| g.len() >= config.cluster_min)
        .flatten()
        .collect()
}

/// Per-record checks over a shared registry, then the batch rules.
pub fn evaluate_batch(
    records: &[FieldRecord],
    config: &BatchConfig,
    bounds: &PlausibilityBounds,
    registry: &mut UuidRegistry,
) -> (Vec<QcVerdict>, BatchFlags) {
    let mut verdicts: Vec<QcVerdict> = records.iter().map(|r| evaluate_record(r, registry, bounds)).collect();
    for i in batch_filling_rows(records, config) {
        verdicts[i].add(BATCH_FILLING);
    }
    for i in spatial_cluster_rows(records, config) {
        verdicts[i].add(SPATIAL_CLUSTER);
    }
    let mut flags = BatchFlags::default();
    for v in &verdicts {
        *flags.category_counts.entry(v.category).or_default() += 1;
        for code in &v.triggered {
            *flags.rule_counts.entry(code.clone()).or_default() += 1;
        }
    }
    (verdicts, flags)
}

/// One JSON object per line: `{"uuid":..,"category":..,"triggered":[..]}`.
pub fn verdicts_to_jsonl(verdicts: &[QcVerdict]) -> Result<String> {
    let mut out = String::new();
    for v in verdicts {
        out.push_str(&serde_json::to_string(v)?);
        out.push('\n');
    }
    Ok(out)
}

/// Plain-text summary: counts per category, then per rule.
pub fn summary_table(flags: &BatchFlags) -> String {
    let mut out = String::from("category,count\n");
    for c in [Category::Ok, Category::Review, Category::Alert] {
        out.push_str(&format!("{c},{}\n", flags.category_counts.get(&c).copied().unwrap_or(0)));
    }
    out.push_str("\nrule,domain,severity,count\n");
    for r in RULES {
        let n = flags.rule_counts.get(r.code).copied().unwrap_or(0);
        let domain = serde_json::to_value(r.domain).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        let severity = match r.severity {
            Severity::Review => "review",
            Severity::Alert => "alert",
        };
        out.push_str(&format!("{},{domain},{severity},{n}\n", r.code));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, NaiveDate, NaiveDateTime};

    fn t0() -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2024, 3, 1).unwrap().and_hms_opt(9, 0, 0).unwrap()
    }

    fn compliant(uuid: &str) -> FieldRecord {
        let mut r = FieldRecord::new(uuid, SurveyKind::Household);
        r.sample_id = Some(format!("S-{uuid}"));
        r.collector = Some(format!("C-{uuid}"));
        r.latitude = Some(13.0);
        r.longitude = Some(80.2);
        r.gps_accuracy_m = Some(5.0);
        r.started_at = Some(t0());
        r.ended_at = Some(t0() + Duration::minutes(10));
        r.photo_count = 3;
        r.expected_photo_count = 3;
        r
    }

    fn verdict(r: &FieldRecord) -> QcVerdict {
        evaluate_record(r, &mut UuidRegistry::new(), &PlausibilityBounds::default())
    }

    #[test]
    fn category_follows_the_severity_lattice() {
        let codes: Vec<&str> = RULES.iter().map(|r| r.code).collect();
        assert_eq!(codes.iter().collect::<BTreeSet<_>>().len(), RULES.len());
        for mask in 0..1u32 << RULES.len() {
            let triggered: Vec<String> = (0..RULES.len())
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| RULES[i].code.to_string())
                .collect();
            let alert = (0..RULES.len()).any(|i| mask >> i & 1 == 1 && RULES[i].severity == Severity::Alert);
            let expected = if alert {
                Category::Alert
            } else if mask != 0 {
                Category::Review
            } else {
                Category::Ok
            };
            assert_eq!(Category::of(&triggered), expected);
        }
    }

    #[test]
    fn single_rule_examples() {
        assert_eq!(verdict(&compliant("a")), QcVerdict { uuid: "a".into(), category: Category::Ok, triggered: vec![] });
        let mut r = compliant("a");
        r.gps_accuracy_m = Some(45.0);
        assert_eq!(verdict(&r).triggered, ["GPS_LOW_ACCURACY"]);
        assert_eq!(verdict(&r).category, Category::Review);
        let mut r = compliant("a");
        r.ended_at = Some(t0() + Duration::seconds(130));
        assert_eq!(verdict(&r).triggered, ["DURATION_SHORT"]);
        r.survey_kind = SurveyKind::WaterBody;
        assert!(verdict(&r).triggered.is_empty());
        let mut r = compliant("a");
        r.ec_present = Some(true);
        r.tc_present = Some(false);
        assert_eq!(verdict(&r).triggered, ["EC_WITHOUT_TC"]);
    }

    #[test]
    fn registry_is_insert_only() {
        let mut reg = UuidRegistry::new();
        assert!(reg.register("x").unwrap());
        assert!(!reg.register("x").unwrap());
        assert!(matches!(reg.register(""), Err(Error::Parameter(_))));
        let bounds = PlausibilityBounds::default();
        for _ in 0..3 {
            let v = evaluate_record(&compliant("x"), &mut reg, &bounds);
            assert_eq!((v.category, v.triggered), (Category::Alert, vec!["DUPLICATE_UUID".to_string()]));
        }
        assert_eq!(reg.len(), 1);
    }

    fn rapid(n: usize, gap_s: i64) -> Vec<FieldRecord> {
        (0..n)
            .map(|i| {
                let mut r = compliant(&format!("r{i}"));
                r.collector = Some("same".into());
                r.latitude = Some(13.0 + 0.01 * i as f64);
                r.ended_at = Some(t0() + Duration::minutes(10) + Duration::seconds(gap_s * i as i64));
                r
            })
            .collect()
    }

    fn run(records: &[FieldRecord], config: &BatchConfig) -> (Vec<QcVerdict>, BatchFlags) {
        evaluate_batch(records, config, &PlausibilityBounds::default(), &mut UuidRegistry::new())
    }

    #[test]
    fn batch_filling_needs_a_long_fast_run() {
        let (v, flags) = run(&rapid(6, 20), &BatchConfig::default());
        assert!(v.iter().all(|v| v.triggered == ["BATCH_FILLING"]));
        assert_eq!(flags.rule_counts["BATCH_FILLING"], 6);
        assert!(!flags.any_alert());
        let (v, _) = run(&rapid(4, 20), &BatchConfig::default());
        assert!(v.iter().all(|v| v.category == Category::Ok));
        let (v, _) = run(&rapid(6, 60), &BatchConfig::default());
        assert!(v.iter().all(|v| v.category == Category::Ok));
    }

    fn near(n: usize, step_m: f64) -> Vec<FieldRecord> {
        (0..n)
            .map(|i| {
                let mut r = compliant(&format!("p{i}"));
                r.latitude = Some(13.0 + step_m * i as f64 / 111_195.0);
                r
            })
            .collect()
    }

    #[test]
    fn spatial_clusters_link_neighbours() {
        let (v, _) = run(&near(2, 5.0), &BatchConfig::default());
        assert!(v.iter().all(|v| v.category == Category::Ok));
        let (v, _) = run(&near(5, 8.0), &BatchConfig::default());
        assert!(v.iter().all(|v| v.triggered == ["SPATIAL_CLUSTER"]));
        let (v, _) = run(&near(5, 12.0), &BatchConfig::default());
        assert!(v.iter().all(|v| v.category == Category::Ok));
        assert!((haversine_m(13.0, 80.0, 13.0 + 1.0 / 111.195, 80.0) - 1000.0).abs() < 0.5);
    }

    #[test]
    fn disabled_batch_rules_reduce_to_per_record_checks() {
        let mut records = rapid(6, 10);
        records.extend(near(6, 1.0));
        records[2].gps_accuracy_m = Some(40.0);
        records.push(compliant("r0"));
        let (batch, _) = run(&records, &BatchConfig::disabled());
        let mut reg = UuidRegistry::new();
        let single: Vec<QcVerdict> = records
            .iter()
            .map(|r| evaluate_record(r, &mut reg, &PlausibilityBounds::default()))
            .collect();
        assert_eq!(batch, single);
        let (empty, flags) = run(&[], &BatchConfig::default());
        assert!(empty.is_empty() && flags == BatchFlags::default());
    }

    #[test]
    fn jsonl_shape() {
        let text = verdicts_to_jsonl(&[verdict(&compliant("a"))]).unwrap();
        assert_eq!(text, "{\"uuid\":\"a\",\"category\":\"OK\",\"triggered\":[]}\n");
    }
}
