use std::collections::{BTreeMap, BTreeSet};

use serde::Deserialize;

use super::{normalize_token, Categorical, FieldRecord, Measurement};
use crate::error::{Error, Result};

/// Label given to categorical answers the dictionary does not recognise.
pub const OTHER: &str = "other";

/// Raw spelling -> canonical label per categorical field, plus unit
/// conversion factors into each measurement's canonical unit.
///
/// JSON layout:
///
/// ```json
/// {"categories": {"treatment": {"boiling treatment": ["Boiled", "boiling", "BOIL"]}},
///  "units": {"tds_ppm": {"g/L": 1000.0}}}
/// ```
///
/// Matching is on trimmed, lowercased, whitespace-collapsed spellings.
#[derive(Debug, Clone, Default)]
pub struct AliasDictionary {
    aliases: BTreeMap<Categorical, BTreeMap<String, String>>,
    units: BTreeMap<Measurement, BTreeMap<String, f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DictionaryFile {
    #[serde(default)]
    categories: BTreeMap<String, BTreeMap<String, Vec<String>>>,
    #[serde(default)]
    units: BTreeMap<String, BTreeMap<String, f64>>,
}

fn builtin_units(m: Measurement) -> &'static [(&'static str, f64)] {
    match m {
        Measurement::Turbidity => &[("ntu", 1.0), ("fnu", 1.0)],
        Measurement::Tds => &[("ppm", 1.0), ("mg/l", 1.0), ("g/l", 1000.0), ("ppt", 1000.0)],
        Measurement::Conductivity => &[("us/cm", 1.0), ("µs/cm", 1.0), ("ms/cm", 1000.0)],
        Measurement::Ph => &[("ph", 1.0)],
        Measurement::Orp => &[("mv", 1.0), ("v", 1000.0)],
        Measurement::Hardness | Measurement::Alkalinity => {
            &[("mg/l", 1.0), ("ppm", 1.0), ("g/l", 1000.0)]
        }
    }
}

impl AliasDictionary {
    /// Dictionary with only the built-in unit conversions.
    pub fn new() -> Self {
        let mut dict = AliasDictionary::default();
        for m in Measurement::ALL {
            let table = dict.units.entry(m).or_default();
            for (unit, factor) in builtin_units(m) {
                table.insert(unit.to_string(), *factor);
            }
        }
        dict
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DictionaryFile = serde_json::from_str(text)?;
        let mut dict = AliasDictionary::new();
        for (field, table) in &file.categories {
            let cat = Categorical::from_name(field)
                .ok_or_else(|| Error::Dictionary(format!("unknown categorical field '{field}'")))?;
            for (canonical, raws) in table {
                dict.add_canonical(cat, canonical)?;
                for raw in raws {
                    dict.add_alias(cat, raw, canonical)?;
                }
            }
        }
        for (field, table) in &file.units {
            let m = Measurement::from_name(field)
                .ok_or_else(|| Error::Dictionary(format!("unknown measurement '{field}'")))?;
            for (unit, factor) in table {
                dict.add_unit(m, unit, *factor)?;
            }
        }
        Ok(dict)
    }

    /// Register a canonical label (it maps onto itself).
    pub fn add_canonical(&mut self, field: Categorical, canonical: &str) -> Result<()> {
        self.add_alias(field, canonical, canonical)?;
        self.add_alias(field, OTHER, OTHER)
    }

    /// Map `raw` onto `canonical`; a raw spelling may only ever have one target.
    pub fn add_alias(&mut self, field: Categorical, raw: &str, canonical: &str) -> Result<()> {
        let key = normalize_token(raw);
        let table = self.aliases.entry(field).or_default();
        match table.get(&key) {
            Some(existing) if existing != canonical => Err(Error::Dictionary(format!(
                "{}: '{raw}' maps to both '{existing}' and '{canonical}'",
                field.name()
            ))),
            _ => {
                table.insert(key, canonical.to_string());
                let self_key = normalize_token(canonical);
                match table.get(&self_key) {
                    Some(existing) if existing != canonical => Err(Error::Dictionary(format!(
                        "{}: canonical '{canonical}' is already an alias of '{existing}'",
                        field.name()
                    ))),
                    _ => {
                        table.insert(self_key, canonical.to_string());
                        Ok(())
                    }
                }
            }
        }
    }

    pub fn add_unit(&mut self, m: Measurement, unit: &str, factor: f64) -> Result<()> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::Dictionary(format!(
                "{}: factor for '{unit}' must be positive",
                m.name()
            )));
        }
        let key = normalize_token(unit);
        let table = self.units.entry(m).or_default();
        match table.get(&key) {
            Some(existing) if *existing != factor => Err(Error::Dictionary(format!(
                "{}: unit '{unit}' has conflicting factors {existing} and {factor}",
                m.name()
            ))),
            _ => {
                table.insert(key, factor);
                Ok(())
            }
        }
    }

    pub fn canonical_labels(&self, field: Categorical) -> BTreeSet<&str> {
        self.aliases
            .get(&field)
            .map(|t| t.values().map(String::as_str).collect())
            .unwrap_or_default()
    }

    fn canonicalize(&self, field: Categorical, raw: &str) -> Option<String> {
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            return None;
        }
        match self.aliases.get(&field) {
            Some(table) => Some(
                table
                    .get(&normalize_token(trimmed))
                    .cloned()
                    .unwrap_or_else(|| OTHER.to_string()),
            ),
            // Fields without dictionary entries pass through as-is.
            None => Some(trimmed.to_string()),
        }
    }

    fn unit_factor(&self, m: Measurement, unit: &str) -> Option<f64> {
        self.units.get(&m)?.get(&normalize_token(unit)).copied()
    }
}

/// Canonicalize categorical spellings and convert tagged units.
///
/// Values carrying an unknown unit tag cannot be interpreted and become
/// missing. Record count and order are unchanged.
pub fn harmonize(records: &[FieldRecord], dictionary: &AliasDictionary) -> Vec<FieldRecord> {
    records
        .iter()
        .map(|r| {
            let mut out = r.clone();
            for c in Categorical::ALL {
                let value = r.categories.get(c).and_then(|v| dictionary.canonicalize(c, v));
                out.categories.set(c, value);
            }
            for m in Measurement::ALL {
                if let Some(unit) = out.units[m.index()].take() {
                    let converted = match dictionary.unit_factor(m, &unit) {
                        Some(factor) => r.measurements.get(m).map(|v| v * factor),
                        None => None,
                    };
                    out.measurements.set(m, converted);
                }
            }
            out
        })
        .collect()
}
