use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    HistGbdt,
    RandomForest,
    Logistic,
}

/// Tree-growth policy for boosting.
///
/// `Leafwise` always expands the leaf with the largest gain; `Depthwise`
/// expands level by level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    Leafwise,
    Depthwise,
}

/// Weight applied to positive samples. `Auto` resolves to the
/// negative/positive ratio of the data the learner is fitted on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassWeight {
    Fixed(f64),
    Auto,
}

impl Serialize for ClassWeight {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ClassWeight::Auto => s.serialize_str("auto"),
            ClassWeight::Fixed(w) => s.serialize_f64(*w),
        }
    }
}

impl<'de> Deserialize<'de> for ClassWeight {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(w) => Ok(ClassWeight::Fixed(w)),
            Raw::Text(t) if t == "auto" => Ok(ClassWeight::Auto),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "positive_class_weight must be a number or \"auto\", got \"{t}\""
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub family: Family,
    pub growth: Growth,
    /// 0 means unlimited.
    pub max_depth: usize,
    pub leaf_limit: usize,
    pub min_samples_per_leaf: usize,
    pub row_subsample: f64,
    pub column_subsample: f64,
    pub l2_regularization: f64,
    pub learning_rate: f64,
    pub iteration_cap: usize,
    pub early_stopping_rounds: usize,
    pub positive_class_weight: ClassWeight,
    pub max_bins: usize,
    /// Forest only: draw each tree's rows with replacement.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            family: Family::HistGbdt,
            growth: Growth::Leafwise,
            max_depth: 6,
            leaf_limit: 31,
            min_samples_per_leaf: 20,
            row_subsample: 0.8,
            column_subsample: 0.8,
            l2_regularization: 1.0,
            learning_rate: 0.05,
            iteration_cap: 2000,
            early_stopping_rounds: 50,
            positive_class_weight: ClassWeight::Auto,
            max_bins: 256,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl LearnerConfig {
    /// Boosting preset that grows trees leaf by leaf.
    pub fn leafwise() -> Self {
        LearnerConfig::default()
    }

    /// Boosting preset that grows trees level by level.
    pub fn depthwise() -> Self {
        LearnerConfig {
            growth: Growth::Depthwise,
            ..LearnerConfig::default()
        }
    }

    pub fn random_forest() -> Self {
        LearnerConfig {
            family: Family::RandomForest,
            max_depth: 0,
            leaf_limit: usize::MAX,
            min_samples_per_leaf: 1,
            row_subsample: 1.0,
            column_subsample: 0.5,
            iteration_cap: 200,
            early_stopping_rounds: 0,
            ..LearnerConfig::default()
        }
    }

    pub fn logistic() -> Self {
        LearnerConfig {
            family: Family::Logistic,
            early_stopping_rounds: 0,
            ..LearnerConfig::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Parameter(m));
        if self.iteration_cap < 1 {
            return fail("iteration_cap must be at least 1".into());
        }
        if self.leaf_limit < 2 {
            return fail("leaf_limit must be at least 2".into());
        }
        if !(2..=256).contains(&self.max_bins) {
            return fail(format!("max_bins must lie in [2, 256], got {}", self.max_bins));
        }
        for (name, v) in [("row_subsample", self.row_subsample), ("column_subsample", self.column_subsample)] {
            if !(v > 0.0 && v <= 1.0) {
                return fail(format!("{name} must lie in (0, 1], got {v}"));
            }
        }
        if !(self.l2_regularization >= 0.0 && self.l2_regularization.is_finite()) {
            return fail(format!("l2_regularization must be non-negative, got {}", self.l2_regularization));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if let ClassWeight::Fixed(w) = self.positive_class_weight {
            if !(w > 0.0 && w.is_finite()) {
                return fail(format!("positive_class_weight must be positive, got {w}"));
            }
        }
        if self.min_samples_per_leaf < 1 {
            return fail("min_samples_per_leaf must be at least 1".into());
        }
        Ok(())
    }
}
