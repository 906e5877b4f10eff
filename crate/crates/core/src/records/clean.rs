use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{normalize_token, Categorical, FieldRecord, Measurement};
use crate::error::{Error, Result};

/// Treatment label that marks reverse-osmosis households.
pub const RO_TREATMENT: &str = "RO treatment";

/// Closed plausibility interval per measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlausibilityBounds([(f64, f64); 7]);

impl Default for PlausibilityBounds {
    fn default() -> Self {
        let mut b = [(0.0, 0.0); 7];
        b[Measurement::Ph.index()] = (0.0, 14.0);
        b[Measurement::Turbidity.index()] = (0.0, 4000.0);
        b[Measurement::Tds.index()] = (0.0, 50_000.0);
        b[Measurement::Conductivity.index()] = (0.0, 80_000.0);
        b[Measurement::Orp.index()] = (-2000.0, 2000.0);
        b[Measurement::Hardness.index()] = (0.0, 10_000.0);
        b[Measurement::Alkalinity.index()] = (0.0, 10_000.0);
        PlausibilityBounds(b)
    }
}

impl PlausibilityBounds {
    pub fn get(&self, m: Measurement) -> (f64, f64) {
        self.0[m.index()]
    }

    pub fn set(&mut self, m: Measurement, low: f64, high: f64) -> Result<()> {
        if !(low <= high) {
            return Err(Error::Parameter(format!(
                "{}: bound low {low} exceeds high {high}",
                m.name()
            )));
        }
        self.0[m.index()] = (low, high);
        Ok(())
    }

    pub fn contains(&self, m: Measurement, value: f64) -> bool {
        let (lo, hi) = self.get(m);
        value >= lo && value <= hi
    }

    /// Measurements of `record` lying outside their interval.
    pub fn violations(&self, record: &FieldRecord) -> Vec<Measurement> {
        record
            .measurements
            .iter()
            .filter_map(|(m, v)| v.filter(|v| !self.contains(m, *v)).map(|_| m))
            .collect()
    }

    /// Overrides from JSON `{"ph": [0, 14], ...}`; unlisted measurements keep defaults.
    pub fn from_json(text: &str) -> Result<Self> {
        let table: BTreeMap<String, (f64, f64)> = serde_json::from_str(text)?;
        let mut bounds = PlausibilityBounds::default();
        for (name, (lo, hi)) in table {
            let m = Measurement::from_name(&name)
                .ok_or_else(|| Error::Parameter(format!("unknown measurement '{name}'")))?;
            bounds.set(m, lo, hi)?;
        }
        Ok(bounds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalReason {
    Duplicate,
    ImplausibleValue,
    RoTreated,
    MissingOutcome,
    Outlier,
}

impl fmt::Display for RemovalReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RemovalReason::Duplicate => "duplicate",
            RemovalReason::ImplausibleValue => "implausible_value",
            RemovalReason::RoTreated => "ro_treated",
            RemovalReason::MissingOutcome => "missing_outcome",
            RemovalReason::Outlier => "outlier",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Removal {
    /// Index into the input of the step that removed the record.
    pub row: usize,
    pub uuid: String,
    pub reason: RemovalReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanLog {
    pub removed: Vec<Removal>,
    pub kept_count: usize,
}

impl CleanLog {
    pub fn input_count(&self) -> usize {
        self.kept_count + self.removed.len()
    }

    /// Input indices that survived, in order.
    pub fn kept_rows(&self) -> Vec<usize> {
        let gone: HashSet<usize> = self.removed.iter().map(|r| r.row).collect();
        (0..self.input_count()).filter(|i| !gone.contains(i)).collect()
    }

    /// Chain a later step's log onto this one, re-expressing its rows in this
    /// log's input indexing.
    pub fn then(&self, later: &CleanLog) -> CleanLog {
        let kept = self.kept_rows();
        let mut removed = self.removed.clone();
        removed.extend(later.removed.iter().map(|r| Removal {
            row: kept[r.row],
            ..r.clone()
        }));
        removed.sort_by_key(|r| r.row);
        CleanLog {
            removed,
            kept_count: later.kept_count,
        }
    }

    pub fn count(&self, reason: RemovalReason) -> usize {
        self.removed.iter().filter(|r| r.reason == reason).count()
    }

    /// JSON lines: `{"row": int, "uuid": string, "reason": string}`.
    pub fn to_jsonl(&self) -> String {
        self.removed
            .iter()
            .map(|r| serde_json::to_string(r).expect("removal serializes") + "\n")
            .collect()
    }
}

fn tuple_key(r: &FieldRecord) -> String {
    let mut anon = r.clone();
    anon.uuid.clear();
    serde_json::to_string(&anon).expect("record serializes")
}

fn is_ro_treated(r: &FieldRecord) -> bool {
    r.categories
        .get(Categorical::Treatment)
        .is_some_and(|t| normalize_token(t) == normalize_token(RO_TREATMENT))
}

/// Technical cleaning. Each removed record is logged with the first rule it
/// breaks, checked in the order duplicate, implausible value, RO treatment,
/// missing outcome.
pub fn clean(records: &[FieldRecord], bounds: &PlausibilityBounds) -> (Vec<FieldRecord>, CleanLog) {
    let mut seen_uuids = HashSet::new();
    let mut seen_tuples = HashSet::new();
    let mut kept = Vec::new();
    let mut log = CleanLog::default();
    for (row, r) in records.iter().enumerate() {
        let uuid_dup = !r.uuid.is_empty() && !seen_uuids.insert(r.uuid.clone());
        let tuple_dup = !seen_tuples.insert(tuple_key(r));
        let reason = if uuid_dup || tuple_dup {
            Some(RemovalReason::Duplicate)
        } else if !bounds.violations(r).is_empty() {
            Some(RemovalReason::ImplausibleValue)
        } else if is_ro_treated(r) {
            Some(RemovalReason::RoTreated)
        } else if r.tc_present.is_none() && r.ec_present.is_none() {
            Some(RemovalReason::MissingOutcome)
        } else {
            None
        };
        match reason {
            Some(reason) => log.removed.push(Removal {
                row,
                uuid: r.uuid.clone(),
                reason,
            }),
            None => kept.push(r.clone()),
        }
    }
    log.kept_count = kept.len();
    (kept, log)
}

/// Remove records with any physicochemical reading more than `z_threshold`
/// sample standard deviations from its column mean. Columns with fewer than
/// two readings or zero spread are not screened.
pub fn screen_outliers(
    records: &[FieldRecord],
    z_threshold: f64,
) -> Result<(Vec<FieldRecord>, CleanLog)> {
    if !(z_threshold > 0.0) {
        return Err(Error::Parameter(format!(
            "z_threshold must be positive, got {z_threshold}"
        )));
    }
    let mut moments = Vec::new();
    for m in Measurement::ALL {
        let vals: Vec<f64> = records.iter().filter_map(|r| r.measurements.get(m)).collect();
        if vals.len() < 2 {
            continue;
        }
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let sd = var.sqrt();
        if sd > 0.0 {
            moments.push((m, mean, sd));
        }
    }
    let mut kept = Vec::new();
    let mut log = CleanLog::default();
    for (row, r) in records.iter().enumerate() {
        let outlying = moments.iter().any(|&(m, mean, sd)| {
            r.measurements
                .get(m)
                .is_some_and(|v| ((v - mean) / sd).abs() > z_threshold)
        });
        if outlying {
            log.removed.push(Removal {
                row,
                uuid: r.uuid.clone(),
                reason: RemovalReason::Outlier,
            });
        } else {
            kept.push(r.clone());
        }
    }
    log.kept_count = kept.len();
    Ok((kept, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::SurveyKind;

    fn rec(uuid: &str) -> FieldRecord {
        let mut r = FieldRecord::new(uuid, SurveyKind::Household);
        r.sample_id = Some(format!("S-{uuid}"));
        r.tc_present = Some(true);
        r.ec_present = Some(false);
        r.measurements.set(Measurement::Ph, Some(7.0));
        r
    }

    #[test]
    fn ro_treated_records_are_excluded() {
        let mut r = rec("a");
        r.categories.set(Categorical::Treatment, Some(RO_TREATMENT.into()));
        let (kept, log) = clean(&[r, rec("b")], &PlausibilityBounds::default());
        assert_eq!(kept.len(), 1);
        assert_eq!(log.removed[0].reason, RemovalReason::RoTreated);
    }

    #[test]
    fn identical_rows_keep_first_occurrence() {
        let (kept, log) = clean(&[rec("a"), rec("a")], &PlausibilityBounds::default());
        assert_eq!(kept.len(), 1);
        assert_eq!(log.removed, vec![Removal { row: 1, uuid: "a".into(), reason: RemovalReason::Duplicate }]);
    }

    #[test]
    fn fresh_uuid_resubmission_is_a_duplicate() {
        let mut again = rec("a");
        again.uuid = "b".into();
        let (kept, log) = clean(&[rec("a"), again], &PlausibilityBounds::default());
        assert_eq!(kept.len(), 1);
        assert_eq!(log.count(RemovalReason::Duplicate), 1);
    }

    #[test]
    fn ph_above_fourteen_is_implausible() {
        let mut r = rec("a");
        r.measurements.set(Measurement::Ph, Some(15.2));
        let (kept, log) = clean(&[r], &PlausibilityBounds::default());
        assert!(kept.is_empty());
        assert_eq!(log.removed[0].reason, RemovalReason::ImplausibleValue);
    }

    #[test]
    fn records_without_any_outcome_are_dropped() {
        let mut r = rec("a");
        r.tc_present = None;
        r.ec_present = None;
        let mut half = rec("b");
        half.tc_present = None;
        let (kept, log) = clean(&[r, half], &PlausibilityBounds::default());
        assert_eq!(kept.len(), 1);
        assert_eq!(log.removed[0].reason, RemovalReason::MissingOutcome);
    }

    #[test]
    fn clean_is_idempotent_and_reconciles() {
        let mut bad = rec("c");
        bad.measurements.set(Measurement::Orp, Some(5000.0));
        let input = vec![rec("a"), rec("a"), bad, rec("d")];
        let (once, log) = clean(&input, &PlausibilityBounds::default());
        assert_eq!(log.kept_count + log.removed.len(), input.len());
        let (twice, log2) = clean(&once, &PlausibilityBounds::default());
        assert_eq!(once, twice);
        assert!(log2.removed.is_empty());
    }

    #[test]
    fn single_extreme_value_is_screened() {
        let mut recs: Vec<_> = (0..100)
            .map(|i| {
                let mut r = rec(&format!("r{i}"));
                r.measurements.set(Measurement::Tds, Some(1.0));
                r
            })
            .collect();
        let mut extreme = rec("x");
        extreme.measurements.set(Measurement::Tds, Some(1000.0));
        recs.push(extreme);
        let (kept, log) = screen_outliers(&recs, 4.0).unwrap();
        assert_eq!(kept.len(), 100);
        assert_eq!(log.removed.len(), 1);
        assert_eq!(log.removed[0].uuid, "x");
        assert_eq!(log.removed[0].reason, RemovalReason::Outlier);
    }

    #[test]
    fn zero_variance_and_huge_threshold_remove_nothing() {
        let recs: Vec<_> = (0..10).map(|i| rec(&format!("r{i}"))).collect();
        assert_eq!(screen_outliers(&recs, 4.0).unwrap().0.len(), 10);
        let mut spread = recs.clone();
        spread[0].measurements.set(Measurement::Ph, Some(1.0));
        assert_eq!(screen_outliers(&spread, 1e12).unwrap().0.len(), 10);
    }

    #[test]
    fn non_positive_threshold_is_rejected() {
        assert!(matches!(screen_outliers(&[], 0.0), Err(Error::Parameter(_))));
        assert!(screen_outliers(&[], f64::NAN).is_err());
    }

    #[test]
    fn chained_logs_refer_to_original_rows() {
        let first = CleanLog {
            removed: vec![Removal { row: 1, uuid: "b".into(), reason: RemovalReason::Duplicate }],
            kept_count: 3,
        };
        let second = CleanLog {
            removed: vec![Removal { row: 1, uuid: "c".into(), reason: RemovalReason::Outlier }],
            kept_count: 2,
        };
        let merged = first.then(&second);
        assert_eq!(merged.removed[1].row, 2);
        assert_eq!(merged.input_count(), 4);
        assert_eq!(merged.kept_rows(), vec![0, 3]);
        assert!(merged.to_jsonl().starts_with(r#"{"row":1,"uuid":"b","reason":"duplicate"}"#));
    }
}
