use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Categorical, DatasetOrigin, FieldRecord, Measurement};
use crate::error::{Error, Result};

/// Name of the auxiliary stage-1 probability column.
pub const PTC_COLUMN: &str = "ptc";
const ORIGIN_COLUMN: &str = "dataset_origin_set2";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Physicochemical,
    Contextual,
    Auxiliary,
}

impl ColumnKind {
    /// Kind implied by a column name: the seven measurements are
    /// physicochemical, the PTC column auxiliary, everything else contextual.
    pub fn infer(name: &str) -> Self {
        if Measurement::from_name(name).is_some() {
            ColumnKind::Physicochemical
        } else if name == PTC_COLUMN {
            ColumnKind::Auxiliary
        } else {
            ColumnKind::Contextual
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

impl Column {
    pub fn new(name: impl Into<String>) -> Self {
        let name = name.into();
        let kind = ColumnKind::infer(&name);
        Column { name, kind }
    }
}

/// Dense row-major design matrix with an explicit missingness mask.
///
/// Missing cells hold `NaN`; the mask is authoritative.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Vec<f64>,
    missing: Vec<bool>,
    columns: Vec<Column>,
    row_ids: Vec<String>,
}

impl FeatureMatrix {
    /// Build from rows of optional cells.
    pub fn from_rows(
        columns: Vec<Column>,
        row_ids: Vec<String>,
        rows: &[Vec<Option<f64>>],
    ) -> Result<Self> {
        if rows.len() != row_ids.len() {
            return Err(Error::Schema(format!(
                "{} rows but {} row ids",
                rows.len(),
                row_ids.len()
            )));
        }
        let n_cols = columns.len();
        let mut values = Vec::with_capacity(rows.len() * n_cols);
        let mut missing = Vec::with_capacity(rows.len() * n_cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::Schema(format!(
                    "row {i} has {} cells, expected {n_cols}",
                    row.len()
                )));
            }
            for cell in row {
                match cell {
                    Some(v) if v.is_finite() => {
                        values.push(*v);
                        missing.push(false);
                    }
                    _ => {
                        values.push(f64::NAN);
                        missing.push(true);
                    }
                }
            }
        }
        Ok(FeatureMatrix {
            values,
            missing,
            columns,
            row_ids,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    /// Cell value, `None` when missing.
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let k = row * self.n_cols() + col;
        (!self.missing[k]).then_some(self.values[k])
    }

    /// Raw cell (the `NaN` sentinel when missing).
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols() + col]
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.missing[row * self.n_cols() + col]
    }

    pub fn row(&self, row: usize) -> Vec<Option<f64>> {
        (0..self.n_cols()).map(|c| self.get(row, c)).collect()
    }

    pub fn column_values(&self, col: usize) -> Vec<Option<f64>> {
        (0..self.n_rows()).map(|r| self.get(r, col)).collect()
    }

    pub(crate) fn set(&mut self, row: usize, col: usize, value: Option<f64>) {
        let k = row * self.n_cols() + col;
        match value {
            Some(v) if v.is_finite() => {
                self.values[k] = v;
                self.missing[k] = false;
            }
            _ => {
                self.values[k] = f64::NAN;
                self.missing[k] = true;
            }
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let n_cols = self.n_cols();
        let mut values = Vec::with_capacity(rows.len() * n_cols);
        let mut missing = Vec::with_capacity(rows.len() * n_cols);
        for &r in rows {
            values.extend_from_slice(&self.values[r * n_cols..(r + 1) * n_cols]);
            missing.extend_from_slice(&self.missing[r * n_cols..(r + 1) * n_cols]);
        }
        FeatureMatrix {
            values,
            missing,
            columns: self.columns.clone(),
            row_ids: rows.iter().map(|&r| self.row_ids[r].clone()).collect(),
        }
    }

    /// Reorder / subset columns by name; every name must exist.
    pub fn select_columns(&self, names: &[String]) -> Result<FeatureMatrix> {
        let idx = names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .ok_or_else(|| Error::Schema(format!("column '{n}' not present")))
            })
            .collect::<Result<Vec<_>>>()?;
        let rows: Vec<Vec<Option<f64>>> = (0..self.n_rows())
            .map(|r| idx.iter().map(|&c| self.get(r, c)).collect())
            .collect();
        let columns = idx.iter().map(|&c| self.columns[c].clone()).collect();
        FeatureMatrix::from_rows(columns, self.row_ids.clone(), &rows)
    }

    /// Keep only columns whose kind passes `keep`.
    pub fn filter_kinds(&self, keep: impl Fn(ColumnKind) -> bool) -> FeatureMatrix {
        let names: Vec<String> = self
            .columns
            .iter()
            .filter(|c| keep(c.kind))
            .map(|c| c.name.clone())
            .collect();
        self.select_columns(&names).expect("names taken from self")
    }

    /// Append a column.
    pub fn with_column(&self, column: Column, cells: &[Option<f64>]) -> Result<FeatureMatrix> {
        if cells.len() != self.n_rows() {
            return Err(Error::Schema(format!(
                "column '{}' has {} cells for {} rows",
                column.name,
                cells.len(),
                self.n_rows()
            )));
        }
        if self.column_index(&column.name).is_some() {
            return Err(Error::Schema(format!("column '{}' already present", column.name)));
        }
        let rows: Vec<Vec<Option<f64>>> = (0..self.n_rows())
            .map(|r| {
                let mut row = self.row(r);
                row.push(cells[r]);
                row
            })
            .collect();
        let mut columns = self.columns.clone();
        columns.push(column);
        FeatureMatrix::from_rows(columns, self.row_ids.clone(), &rows)
    }

    /// Write as CSV: a `uuid` column followed by the feature columns; missing
    /// cells are blank.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["uuid".to_string()];
        header.extend(self.column_names());
        w.write_record(&header)?;
        for r in 0..self.n_rows() {
            let mut row = vec![self.row_ids[r].clone()];
            row.extend(
                self.row(r)
                    .into_iter()
                    .map(|c| c.map(|v| v.to_string()).unwrap_or_default()),
            );
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Inverse of [`FeatureMatrix::write_csv`]; column kinds come from
    /// [`ColumnKind::infer`].
    pub fn read_csv<R: Read>(input: R) -> Result<FeatureMatrix> {
        let mut reader = csv::Reader::from_reader(input);
        let headers = reader.headers()?.clone();
        if headers.get(0) != Some("uuid") {
            return Err(Error::Schema("feature CSV must start with a 'uuid' column".into()));
        }
        let columns: Vec<Column> = headers.iter().skip(1).map(Column::new).collect();
        let mut ids = Vec::new();
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            ids.push(rec.get(0).unwrap_or_default().to_string());
            let row = rec
                .iter()
                .skip(1)
                .map(|cell| {
                    let cell = cell.trim();
                    if cell.is_empty() {
                        Ok(None)
                    } else {
                        cell.parse::<f64>().map(Some).map_err(|_| {
                            Error::Schema(format!("row {i}: '{cell}' is not numeric"))
                        })
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        FeatureMatrix::from_rows(columns, ids, &rows)
    }
}

/// Binary outcomes aligned with a [`FeatureMatrix`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labels {
    pub tc: Vec<u8>,
    pub ec: Vec<u8>,
}

impl Labels {
    pub fn len(&self) -> usize {
        self.ec.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ec.is_empty()
    }

    pub fn select(&self, rows: &[usize]) -> Labels {
        Labels {
            tc: rows.iter().map(|&r| self.tc[r]).collect(),
            ec: rows.iter().map(|&r| self.ec[r]).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, row_ids: &[String], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["uuid", "tc", "ec"])?;
        for (i, id) in row_ids.iter().enumerate() {
            w.write_record([id.as_str(), &self.tc[i].to_string(), &self.ec[i].to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read `uuid,tc,ec` rows, returning the ids alongside.
    pub fn read_csv<R: Read>(input: R) -> Result<(Vec<String>, Labels)> {
        let mut reader = csv::Reader::from_reader(input);
        let mut ids = Vec::new();
        let mut labels = Labels { tc: Vec::new(), ec: Vec::new() };
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let bit = |k: usize| -> Result<u8> {
                match rec.get(k).map(str::trim) {
                    Some("0") => Ok(0),
                    Some("1") => Ok(1),
                    other => Err(Error::Schema(format!("row {i}: label {other:?} is not 0/1"))),
                }
            };
            ids.push(rec.get(0).unwrap_or_default().to_string());
            labels.tc.push(bit(1)?);
            labels.ec.push(bit(2)?);
        }
        Ok((ids, labels))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Source {
    Measurement(Measurement),
    Latitude,
    Longitude,
    Children,
    Origin,
    OneHot(Categorical, String),
    Absent,
}

fn source_of(name: &str) -> Source {
    if let Some(m) = Measurement::from_name(name) {
        return Source::Measurement(m);
    }
    match name {
        "latitude" => Source::Latitude,
        "longitude" => Source::Longitude,
        "children_under_5" => Source::Children,
        ORIGIN_COLUMN => Source::Origin,
        _ => name
            .split_once('=')
            .and_then(|(field, value)| {
                Categorical::from_name(field).map(|c| Source::OneHot(c, value.to_string()))
            })
            .unwrap_or(Source::Absent),
    }
}

/// Ordered column layout derived from training records.
///
/// Physicochemical columns come first, then contextual ones, each block in
/// lexicographic order. Categorical levels become `field=level` one-hot
/// columns; an unseen level encodes as all zeros.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub columns: Vec<Column>,
}

impl FeatureSchema {
    pub fn from_records(records: &[FieldRecord]) -> Self {
        let mut physico: Vec<String> =
            Measurement::ALL.iter().map(|m| m.name().to_string()).collect();
        physico.sort();
        let mut contextual: BTreeSet<String> = ["latitude", "longitude", "children_under_5", ORIGIN_COLUMN]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut levels: BTreeMap<Categorical, BTreeSet<String>> = BTreeMap::new();
        for r in records {
            for c in Categorical::ALL {
                if let Some(v) = r.categories.get(c) {
                    levels.entry(c).or_default().insert(v.to_string());
                }
            }
        }
        for (c, vals) in levels {
            for v in vals {
                contextual.insert(format!("{}={v}", c.name()));
            }
        }
        let columns = physico
            .into_iter()
            .chain(contextual)
            .map(Column::new)
            .collect();
        FeatureSchema { columns }
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    /// Encode records under this layout.
    pub fn encode(&self, records: &[FieldRecord]) -> Result<FeatureMatrix> {
        let sources: Vec<Source> = self.columns.iter().map(|c| source_of(&c.name)).collect();
        if let Some(pos) = sources.iter().position(|s| *s == Source::Absent) {
            return Err(Error::Schema(format!(
                "column '{}' cannot be derived from survey records",
                self.columns[pos].name
            )));
        }
        let rows: Vec<Vec<Option<f64>>> = records
            .iter()
            .map(|r| {
                sources
                    .iter()
                    .map(|s| match s {
                        Source::Measurement(m) => r.measurements.get(*m),
                        Source::Latitude => r.latitude,
                        Source::Longitude => r.longitude,
                        Source::Children => r.children_under_5.map(f64::from),
                        Source::Origin => {
                            Some(if r.dataset_origin == DatasetOrigin::Set2 { 1.0 } else { 0.0 })
                        }
                        Source::OneHot(c, level) => {
                            Some(if r.categories.get(*c) == Some(level.as_str()) { 1.0 } else { 0.0 })
                        }
                        Source::Absent => None,
                    })
                    .collect()
            })
            .collect();
        FeatureMatrix::from_rows(
            self.columns.clone(),
            records.iter().map(|r| r.uuid.clone()).collect(),
            &rows,
        )
    }
}

/// Outcome vectors for cleaned records.
///
/// A missing TC label is inferred from EC = 1 (E. coli is itself a coliform),
/// and a missing EC label from TC = 0; any other gap is an error.
pub fn encode_labels(records: &[FieldRecord]) -> Result<Labels> {
    let mut labels = Labels { tc: Vec::with_capacity(records.len()), ec: Vec::with_capacity(records.len()) };
    for (i, r) in records.iter().enumerate() {
        let (tc, ec) = match (r.tc_present, r.ec_present) {
            (Some(tc), Some(ec)) => (tc, ec),
            (None, Some(true)) => (true, true),
            (Some(false), None) => (false, false),
            _ => {
                return Err(Error::Schema(format!(
                    "record {i} ('{}') lacks an outcome label that cannot be inferred",
                    r.uuid
                )))
            }
        };
        labels.tc.push(u8::from(tc));
        labels.ec.push(u8::from(ec));
    }
    Ok(labels)
}

/// Encode cleaned records into a design matrix and outcome labels.
pub fn encode(records: &[FieldRecord]) -> Result<(FeatureMatrix, Labels)> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no records to encode".into()));
    }
    let schema = FeatureSchema::from_records(records);
    Ok((schema.encode(records)?, encode_labels(records)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::SurveyKind;

    fn rec(uuid: &str, treatment: &str) -> FieldRecord {
        let mut r = FieldRecord::new(uuid, SurveyKind::Household);
        r.categories.set(Categorical::Treatment, Some(treatment.into()));
        r.tc_present = Some(true);
        r.ec_present = Some(false);
        r.measurements.set(Measurement::Ph, Some(7.2));
        r
    }

    #[test]
    fn one_hot_rows() {
        let (m, labels) = encode(&[rec("a", "boiling"), rec("b", "none")]).unwrap();
        let boil = m.column_index("treatment=boiling").unwrap();
        let none = m.column_index("treatment=none").unwrap();
        assert_eq!((m.get(0, boil), m.get(0, none)), (Some(1.0), Some(0.0)));
        assert_eq!((m.get(1, boil), m.get(1, none)), (Some(0.0), Some(1.0)));
        assert_eq!(labels.tc, vec![1, 1]);
        assert_eq!(m.row_ids(), ["a", "b"]);
    }

    #[test]
    fn missing_orp_sets_mask() {
        let (m, _) = encode(&[rec("a", "x")]).unwrap();
        let orp = m.column_index("orp_mv").unwrap();
        assert!(m.is_missing(0, orp));
        assert_eq!(m.get(0, orp), None);
    }

    #[test]
    fn exactly_seven_physicochemical_columns_lead() {
        let (m, _) = encode(&[rec("a", "x")]).unwrap();
        let kinds: Vec<_> = m.columns().iter().map(|c| c.kind).collect();
        assert_eq!(kinds.iter().filter(|k| **k == ColumnKind::Physicochemical).count(), 7);
        assert!(kinds[..7].iter().all(|k| *k == ColumnKind::Physicochemical));
        let names = m.column_names();
        let mut sorted = names[..7].to_vec();
        sorted.sort();
        assert_eq!(sorted, names[..7]);
        let mut ctx = names[7..].to_vec();
        ctx.sort();
        assert_eq!(ctx, names[7..]);
        assert!(names.contains(&ORIGIN_COLUMN.to_string()));
        assert!(names.contains(&"latitude".to_string()));
    }

    #[test]
    fn encoding_is_deterministic() {
        let recs = vec![rec("a", "boiling"), rec("b", "none"), rec("c", "boiling")];
        let (m1, _) = encode(&recs).unwrap();
        let (m2, _) = encode(&recs).unwrap();
        let bits = |m: &FeatureMatrix| -> Vec<u64> {
            (0..m.n_rows())
                .flat_map(|r| (0..m.n_cols()).map(move |c| (r, c)))
                .map(|(r, c)| m.value(r, c).to_bits())
                .collect()
        };
        assert_eq!(bits(&m1), bits(&m2));
    }

    #[test]
    fn unseen_category_encodes_all_zero() {
        let schema = FeatureSchema::from_records(&[rec("a", "boiling"), rec("b", "none")]);
        let m = schema.encode(&[rec("z", "solar disinfection")]).unwrap();
        for (c, col) in m.columns().iter().enumerate() {
            if col.name.starts_with("treatment=") {
                assert_eq!(m.get(0, c), Some(0.0));
            }
        }
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(matches!(encode(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn label_inference_rules() {
        let mut a = rec("a", "x");
        a.tc_present = None;
        a.ec_present = Some(true);
        let mut b = rec("b", "x");
        b.tc_present = Some(false);
        b.ec_present = None;
        let labels = encode_labels(&[a, b]).unwrap();
        assert_eq!(labels.tc, vec![1, 0]);
        assert_eq!(labels.ec, vec![1, 0]);
        let mut c = rec("c", "x");
        c.ec_present = None;
        assert!(encode_labels(&[c]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let (m, labels) = encode(&[rec("a", "boiling"), rec("b", "none")]).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let back = FeatureMatrix::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.column_names(), m.column_names());
        assert_eq!(back.columns(), m.columns());
        for r in 0..m.n_rows() {
            assert_eq!(back.row(r), m.row(r));
        }
        let mut lbuf = Vec::new();
        labels.write_csv(m.row_ids(), &mut lbuf).unwrap();
        let (ids, lback) = Labels::read_csv(lbuf.as_slice()).unwrap();
        assert_eq!(ids, m.row_ids());
        assert_eq!(lback, labels);
    }

    #[test]
    fn appended_column_and_selection() {
        let (m, _) = encode(&[rec("a", "boiling"), rec("b", "none")]).unwrap();
        let with = m
            .with_column(Column::new(PTC_COLUMN), &[Some(0.2), Some(0.9)])
            .unwrap();
        assert_eq!(with.columns().last().unwrap().kind, ColumnKind::Auxiliary);
        assert!(with.with_column(Column::new(PTC_COLUMN), &[None, None]).is_err());
        let sub = with.select_rows(&[1]);
        assert_eq!(sub.row_ids(), ["b"]);
        assert_eq!(sub.get(0, sub.n_cols() - 1), Some(0.9));
        let physico = with.filter_kinds(|k| k == ColumnKind::Physicochemical);
        assert_eq!(physico.n_cols(), 7);
    }
}
