//! Survey records: ingestion, harmonization, cleaning, outlier screening,
//! feature encoding and the stratified train/test split.

mod clean;
mod encode;
mod harmonize;
mod parse;
mod split;

pub use clean::{
    clean, screen_outliers, CleanLog, PlausibilityBounds, Removal, RemovalReason, RO_TREATMENT,
};
pub use encode::{
    encode, encode_labels, Column, ColumnKind, FeatureMatrix, FeatureSchema, Labels, PTC_COLUMN,
};
pub use harmonize::{harmonize, AliasDictionary, OTHER};
pub use parse::{parse_records, write_records, ColumnSchema, ParseWarning, ParsedRecords};
pub use split::stratified_split;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurveyKind {
    Household,
    WaterBody,
}

impl SurveyKind {
    pub fn parse(raw: &str) -> Option<Self> {
        match normalize_token(raw).replace([' ', '-'], "_").as_str() {
            "household" | "hh" => Some(SurveyKind::Household),
            "water_body" | "waterbody" | "wb" => Some(SurveyKind::WaterBody),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SurveyKind::Household => "household",
            SurveyKind::WaterBody => "water_body",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetOrigin {
    Set1,
    Set2,
}

impl DatasetOrigin {
    pub fn parse(raw: &str) -> Option<Self> {
        match normalize_token(raw).replace(' ', "").as_str() {
            "set1" | "1" => Some(DatasetOrigin::Set1),
            "set2" | "2" => Some(DatasetOrigin::Set2),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetOrigin::Set1 => "set1",
            DatasetOrigin::Set2 => "set2",
        }
    }
}

/// The seven physicochemical readings taken at the tap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measurement {
    Turbidity,
    Tds,
    Conductivity,
    Ph,
    Orp,
    Hardness,
    Alkalinity,
}

impl Measurement {
    pub const ALL: [Measurement; 7] = [
        Measurement::Turbidity,
        Measurement::Tds,
        Measurement::Conductivity,
        Measurement::Ph,
        Measurement::Orp,
        Measurement::Hardness,
        Measurement::Alkalinity,
    ];

    /// Field / column name, which also encodes the canonical unit.
    pub fn name(self) -> &'static str {
        match self {
            Measurement::Turbidity => "turbidity_ntu",
            Measurement::Tds => "tds_ppm",
            Measurement::Conductivity => "conductivity_us_cm",
            Measurement::Ph => "ph",
            Measurement::Orp => "orp_mv",
            Measurement::Hardness => "hardness_mg_l",
            Measurement::Alkalinity => "alkalinity_mg_l",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn unit_column(self) -> String {
        format!("{}_unit", self.name())
    }
}

/// Optional reading per [`Measurement`], indexed by the enum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Measurements(pub [Option<f64>; 7]);

impl Measurements {
    pub fn get(&self, m: Measurement) -> Option<f64> {
        self.0[m.index()]
    }

    pub fn set(&mut self, m: Measurement, value: Option<f64>) {
        self.0[m.index()] = value;
    }

    pub fn iter(&self) -> impl Iterator<Item = (Measurement, Option<f64>)> + '_ {
        Measurement::ALL.into_iter().map(move |m| (m, self.get(m)))
    }
}

/// Categorical survey answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Categorical {
    SourceType,
    ContainerType,
    ContainerMaterial,
    ContainerPlacement,
    StorageDuration,
    Treatment,
    EducationLevel,
    Sex,
    Perception,
}

impl Categorical {
    pub const ALL: [Categorical; 9] = [
        Categorical::SourceType,
        Categorical::ContainerType,
        Categorical::ContainerMaterial,
        Categorical::ContainerPlacement,
        Categorical::StorageDuration,
        Categorical::Treatment,
        Categorical::EducationLevel,
        Categorical::Sex,
        Categorical::Perception,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Categorical::SourceType => "source_type",
            Categorical::ContainerType => "container_type",
            Categorical::ContainerMaterial => "container_material",
            Categorical::ContainerPlacement => "container_placement",
            Categorical::StorageDuration => "storage_duration",
            Categorical::Treatment => "treatment",
            Categorical::EducationLevel => "education_level",
            Categorical::Sex => "sex",
            Categorical::Perception => "perception",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Categories(pub [Option<String>; 9]);

impl Categories {
    pub fn get(&self, c: Categorical) -> Option<&str> {
        self.0[c.index()].as_deref()
    }

    pub fn set(&mut self, c: Categorical, value: Option<String>) {
        self.0[c.index()] = value;
    }
}

/// One survey submission.
///
/// An empty `uuid` means the platform export lost the identifier; QC flags it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldRecord {
    pub uuid: String,
    pub sample_id: Option<String>,
    /// Submitting student / device; used by the batch-filling rule.
    pub collector: Option<String>,
    pub latitude: Option<f64>,
    pub longitude: Option<f64>,
    pub gps_accuracy_m: Option<f64>,
    pub started_at: Option<NaiveDateTime>,
    pub ended_at: Option<NaiveDateTime>,
    pub survey_kind: SurveyKind,
    pub photo_count: u32,
    pub expected_photo_count: u32,
    pub measurements: Measurements,
    /// Raw unit tag per measurement; `None` means already canonical.
    pub units: [Option<String>; 7],
    pub categories: Categories,
    pub children_under_5: Option<u32>,
    pub dataset_origin: DatasetOrigin,
    pub tc_present: Option<bool>,
    pub ec_present: Option<bool>,
}

impl FieldRecord {
    pub fn new(uuid: impl Into<String>, survey_kind: SurveyKind) -> Self {
        FieldRecord {
            uuid: uuid.into(),
            sample_id: None,
            collector: None,
            latitude: None,
            longitude: None,
            gps_accuracy_m: None,
            started_at: None,
            ended_at: None,
            survey_kind,
            photo_count: 0,
            expected_photo_count: 0,
            measurements: Measurements::default(),
            units: Default::default(),
            categories: Categories::default(),
            children_under_5: None,
            dataset_origin: DatasetOrigin::Set1,
            tc_present: None,
            ec_present: None,
        }
    }

    pub fn duration_seconds(&self) -> Option<i64> {
        match (self.started_at, self.ended_at) {
            (Some(s), Some(e)) => Some((e - s).num_seconds()),
            _ => None,
        }
    }

    /// Submission time: end of survey when known, else its start.
    pub fn submitted_at(&self) -> Option<NaiveDateTime> {
        self.ended_at.or(self.started_at)
    }
}

/// Lowercase, trim and collapse inner whitespace.
pub(crate) fn normalize_token(raw: &str) -> String {
    raw.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}
