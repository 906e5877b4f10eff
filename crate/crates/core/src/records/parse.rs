use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::{Categorical, DatasetOrigin, FieldRecord, Measurement, SurveyKind};
use crate::error::{Error, Result};

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

const SCALAR_FIELDS: [&str; 15] = [
    "uuid",
    "sample_id",
    "collector",
    "latitude",
    "longitude",
    "gps_accuracy_m",
    "started_at",
    "ended_at",
    "survey_kind",
    "photo_count",
    "expected_photo_count",
    "children_under_5",
    "dataset_origin",
    "tc_present",
    "ec_present",
];

const MANDATORY: [&str; 2] = ["uuid", "survey_kind"];

/// Every record field name a CSV column can map onto, in canonical order.
fn all_fields() -> Vec<String> {
    let mut out: Vec<String> = SCALAR_FIELDS.iter().map(|s| s.to_string()).collect();
    for m in Measurement::ALL {
        out.push(m.name().to_string());
        out.push(m.unit_column());
    }
    for c in Categorical::ALL {
        out.push(c.name().to_string());
    }
    out
}

/// Maps record field names to CSV header names.
///
/// Fields not listed fall back to a header of the same name.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ColumnSchema(pub BTreeMap<String, String>);

impl ColumnSchema {
    pub fn from_json(text: &str) -> Result<Self> {
        let schema: ColumnSchema = serde_json::from_str(text)?;
        let known = all_fields();
        for field in schema.0.keys() {
            if !known.iter().any(|k| k == field) {
                return Err(Error::Schema(format!("unknown record field '{field}'")));
            }
        }
        Ok(schema)
    }

    pub fn header_for<'a>(&'a self, field: &'a str) -> &'a str {
        self.0.get(field).map(String::as_str).unwrap_or(field)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseWarning {
    /// Zero-based data row (header excluded).
    pub row: usize,
    pub column: String,
    pub value: String,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedRecords {
    pub records: Vec<FieldRecord>,
    pub warnings: Vec<ParseWarning>,
}

struct RowCtx<'a> {
    row: usize,
    cells: &'a csv::StringRecord,
    index: &'a BTreeMap<String, usize>,
    warnings: &'a mut Vec<ParseWarning>,
}

impl RowCtx<'_> {
    fn raw(&self, field: &str) -> Option<&str> {
        let idx = *self.index.get(field)?;
        let cell = self.cells.get(idx)?.trim();
        (!cell.is_empty()).then_some(cell)
    }

    fn warn(&mut self, field: &str, value: &str, message: &str) {
        self.warnings.push(ParseWarning {
            row: self.row,
            column: field.to_string(),
            value: value.to_string(),
            message: message.to_string(),
        });
    }

    fn text(&self, field: &str) -> Option<String> {
        self.raw(field).map(str::to_string)
    }

    fn real(&mut self, field: &str) -> Option<f64> {
        let raw = self.raw(field)?;
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Some(v),
            _ => {
                let raw = raw.to_string();
                self.warn(field, &raw, "not a finite number; treated as missing");
                None
            }
        }
    }

    fn count(&mut self, field: &str) -> Option<u32> {
        let raw = self.raw(field)?;
        let parsed = raw
            .parse::<u32>()
            .ok()
            .or_else(|| {
                raw.parse::<f64>()
                    .ok()
                    .filter(|v| v.fract() == 0.0 && *v >= 0.0 && *v <= f64::from(u32::MAX))
                    .map(|v| v as u32)
            });
        if parsed.is_none() {
            let raw = raw.to_string();
            self.warn(field, &raw, "not a non-negative integer; treated as missing");
        }
        parsed
    }

    fn timestamp(&mut self, field: &str) -> Option<NaiveDateTime> {
        let raw = self.raw(field)?;
        let parsed = parse_timestamp(raw);
        if parsed.is_none() {
            let raw = raw.to_string();
            self.warn(field, &raw, "unrecognized timestamp; treated as missing");
        }
        parsed
    }

    fn flag(&mut self, field: &str) -> Option<bool> {
        let raw = self.raw(field)?;
        let parsed = match super::normalize_token(raw).as_str() {
            "1" | "true" | "yes" | "y" | "present" | "positive" | "detected" => Some(true),
            "0" | "false" | "no" | "n" | "absent" | "negative" | "not detected" => Some(false),
            _ => None,
        };
        if parsed.is_none() {
            let raw = raw.to_string();
            self.warn(field, &raw, "not a binary outcome; treated as missing");
        }
        parsed
    }
}

pub(crate) fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.naive_utc());
    }
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(raw, fmt).ok())
}

/// Parse survey CSV into records.
///
/// Unparseable cells become missing and leave a [`ParseWarning`]; blank cells
/// are silently missing.
pub fn parse_records<R: Read>(input: R, schema: &ColumnSchema) -> Result<ParsedRecords> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let headers = match reader.headers() {
        Ok(h) => h.clone(),
        Err(e) => {
            return match e.kind() {
                csv::ErrorKind::Io(_) => Err(e.into()),
                _ => Err(Error::EmptyInput("no header row".into())),
            }
        }
    };
    if headers.is_empty() || headers.iter().all(|h| h.trim().is_empty()) {
        return Err(Error::EmptyInput("no header row".into()));
    }
    let positions: BTreeMap<&str, usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim(), i))
        .collect();

    // field name -> column position
    let mut index = BTreeMap::new();
    for field in all_fields() {
        if let Some(&pos) = positions.get(schema.header_for(&field)) {
            index.insert(field, pos);
        }
    }
    let missing: Vec<&str> = MANDATORY
        .iter()
        .copied()
        .filter(|f| !index.contains_key(*f))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Schema(format!(
            "missing mandatory column(s): {}",
            missing.join(", ")
        )));
    }

    let mut out = ParsedRecords::default();
    for (row, cells) in reader.records().enumerate() {
        let cells = cells?;
        let mut ctx = RowCtx {
            row,
            cells: &cells,
            index: &index,
            warnings: &mut out.warnings,
        };
        out.records.push(parse_row(&mut ctx));
    }
    Ok(out)
}

fn parse_row(ctx: &mut RowCtx<'_>) -> FieldRecord {
    let survey_kind = match ctx.text("survey_kind") {
        Some(raw) => SurveyKind::parse(&raw).unwrap_or_else(|| {
            ctx.warn("survey_kind", &raw, "unknown survey kind; assuming household");
            SurveyKind::Household
        }),
        None => {
            ctx.warn("survey_kind", "", "missing survey kind; assuming household");
            SurveyKind::Household
        }
    };
    let mut rec = FieldRecord::new(ctx.text("uuid").unwrap_or_default(), survey_kind);
    rec.sample_id = ctx.text("sample_id");
    rec.collector = ctx.text("collector");
    rec.latitude = ctx.real("latitude");
    rec.longitude = ctx.real("longitude");
    rec.gps_accuracy_m = ctx.real("gps_accuracy_m");
    rec.started_at = ctx.timestamp("started_at");
    rec.ended_at = ctx.timestamp("ended_at");
    rec.photo_count = ctx.count("photo_count").unwrap_or(0);
    rec.expected_photo_count = ctx.count("expected_photo_count").unwrap_or(0);
    rec.children_under_5 = ctx.count("children_under_5");
    for m in Measurement::ALL {
        rec.measurements.set(m, ctx.real(m.name()));
        rec.units[m.index()] = ctx.text(&m.unit_column());
    }
    for c in Categorical::ALL {
        rec.categories.set(c, ctx.text(c.name()));
    }
    rec.dataset_origin = match ctx.text("dataset_origin") {
        Some(raw) => DatasetOrigin::parse(&raw).unwrap_or_else(|| {
            ctx.warn("dataset_origin", &raw, "unknown dataset origin; assuming set1");
            DatasetOrigin::Set1
        }),
        None => DatasetOrigin::Set1,
    };
    rec.tc_present = ctx.flag("tc_present");
    rec.ec_present = ctx.flag("ec_present");
    rec
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn fmt_flag(v: Option<bool>) -> String {
    match v {
        Some(true) => "1".into(),
        Some(false) => "0".into(),
        None => String::new(),
    }
}

/// Write records using canonical field names as headers.
///
/// Reals are written in shortest round-trip form, so `parse_records` with the
/// default schema reproduces them exactly.
pub fn write_records<W: Write>(records: &[FieldRecord], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(all_fields())?;
    for r in records {
        let mut row = vec![
            r.uuid.clone(),
            r.sample_id.clone().unwrap_or_default(),
            r.collector.clone().unwrap_or_default(),
            fmt_opt(r.latitude),
            fmt_opt(r.longitude),
            fmt_opt(r.gps_accuracy_m),
            fmt_opt(r.started_at.map(|t| t.format(TIMESTAMP_FORMAT))),
            fmt_opt(r.ended_at.map(|t| t.format(TIMESTAMP_FORMAT))),
            r.survey_kind.as_str().to_string(),
            r.photo_count.to_string(),
            r.expected_photo_count.to_string(),
            fmt_opt(r.children_under_5),
            r.dataset_origin.as_str().to_string(),
            fmt_flag(r.tc_present),
            fmt_flag(r.ec_present),
        ];
        for m in Measurement::ALL {
            row.push(fmt_opt(r.measurements.get(m)));
            row.push(r.units[m.index()].clone().unwrap_or_default());
        }
        for c in Categorical::ALL {
            row.push(r.categories.get(c).unwrap_or_default().to_string());
        }
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}
