//! Category-level affinity levels, task-level empirical bands, and
//! curriculum composition reports.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::ingest::Mapping;
use crate::model::Category;
use crate::ratio::{Ratio, Rounding};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AffinityError {
    #[error("the Ambiguous label has no affinity level")]
    Ambiguous,
    #[error("value {0} is outside [0, 1]")]
    OutOfRange(f64),
    #[error("unknown affinity level {0:?}")]
    UnknownLevel(String),
    #[error("affinity overrides: {0}")]
    Overrides(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AffinityLevel {
    VeryLow,
    Low,
    Medium,
    High,
}

impl AffinityLevel {
    pub const ALL: [AffinityLevel; 4] = [
        AffinityLevel::High,
        AffinityLevel::Medium,
        AffinityLevel::Low,
        AffinityLevel::VeryLow,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AffinityLevel::VeryLow => "VeryLow",
            AffinityLevel::Low => "Low",
            AffinityLevel::Medium => "Medium",
            AffinityLevel::High => "High",
        }
    }

    /// 0 for VeryLow up to 3 for High.
    pub fn ordinal(self) -> u8 {
        self as u8
    }

    pub fn is_low(self) -> bool {
        self <= AffinityLevel::Low
    }
}

impl fmt::Display for AffinityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for AffinityLevel {
    type Err = AffinityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, ' ' | '_' | '-'))
            .flat_map(char::to_lowercase)
            .collect();
        Ok(match key.as_str() {
            "verylow" => AffinityLevel::VeryLow,
            "low" => AffinityLevel::Low,
            "medium" => AffinityLevel::Medium,
            "high" => AffinityLevel::High,
            _ => return Err(AffinityError::UnknownLevel(s.to_string())),
        })
    }
}

impl Serialize for AffinityLevel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for AffinityLevel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Default level for each category.
pub fn theoretical_affinity(c: Category) -> Result<AffinityLevel, AffinityError> {
    use Category::*;
    Ok(match c {
        C1 => AffinityLevel::High,
        S1 | S2 | C2 | K1 | L1 => AffinityLevel::Medium,
        S3 | A1 => AffinityLevel::Low,
        A2 => AffinityLevel::VeryLow,
        Ambiguous => return Err(AffinityError::Ambiguous),
    })
}

/// Category to level table, starting from the defaults and optionally overridden.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AffinityMap {
    pub by_category: BTreeMap<Category, AffinityLevel>,
}

impl Default for AffinityMap {
    fn default() -> Self {
        AffinityMap {
            by_category: Category::CLASSIFIABLE
                .iter()
                .map(|&c| (c, theoretical_affinity(c).expect("classifiable")))
                .collect(),
        }
    }
}

impl AffinityMap {
    /// Defaults with the entries of a JSON object `{"S3": "Medium", ...}` applied.
    pub fn with_overrides_json(text: &str) -> Result<Self, AffinityError> {
        let raw: BTreeMap<String, String> =
            serde_json::from_str(text).map_err(|e| AffinityError::Overrides(e.to_string()))?;
        let mut map = AffinityMap::default();
        for (k, v) in raw {
            let c: Category = k.parse().map_err(|e: crate::model::ModelError| AffinityError::Overrides(e.to_string()))?;
            if !c.is_classifiable() {
                return Err(AffinityError::Ambiguous);
            }
            map.by_category.insert(c, v.parse()?);
        }
        Ok(map)
    }

    pub fn level(&self, c: Category) -> Option<AffinityLevel> {
        self.by_category.get(&c).copied()
    }

    pub fn is_low(&self, c: Category) -> bool {
        self.level(c).is_some_and(AffinityLevel::is_low)
    }

    pub fn categories_at(&self, level: AffinityLevel) -> Vec<Category> {
        self.by_category
            .iter()
            .filter(|(_, &l)| l == level)
            .map(|(&c, _)| c)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum EmpiricalBand {
    Low,
    Medium,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalAffinity {
    pub band: EmpiricalBand,
    pub source_value: f64,
}

/// Band of a base cell accuracy: below 0.70 Low, above 0.85 High, Medium otherwise.
pub fn empirical_band(base_cell_acc: f64) -> Result<EmpiricalAffinity, AffinityError> {
    if !(0.0..=1.0).contains(&base_cell_acc) {
        return Err(AffinityError::OutOfRange(base_cell_acc));
    }
    let band = if base_cell_acc < 0.70 {
        EmpiricalBand::Low
    } else if base_cell_acc > 0.85 {
        EmpiricalBand::High
    } else {
        EmpiricalBand::Medium
    };
    Ok(EmpiricalAffinity {
        band,
        source_value: base_cell_acc,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasReport {
    pub numerator: u64,
    pub denominator: u64,
    pub fraction: Option<f64>,
    pub percent: String,
    pub low_categories: Vec<Category>,
}

impl BiasReport {
    pub fn ratio(&self) -> Ratio {
        Ratio::new(self.numerator, self.denominator)
    }

    /// `"141/400 = 35.3%"`.
    pub fn summary(&self) -> String {
        format!("{}/{} = {}%", self.numerator, self.denominator, self.percent)
    }
}

/// Share of the mapping (Ambiguous included in the denominator) whose category
/// sits at Low or VeryLow affinity.
pub fn curriculum_bias(mapping: &Mapping, affinity: &AffinityMap) -> BiasReport {
    let numerator = mapping.values().filter(|&&c| affinity.is_low(c)).count() as u64;
    let ratio = Ratio::new(numerator, mapping.len() as u64);
    BiasReport {
        numerator,
        denominator: ratio.denominator,
        fraction: ratio.to_f64(),
        percent: ratio.percent(Rounding::HalfUp),
        low_categories: Category::CLASSIFIABLE
            .into_iter()
            .filter(|&c| affinity.is_low(c))
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DistributionRow {
    pub category: Category,
    pub count: u64,
    pub percent: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Distribution {
    /// Classifiable categories by descending count (ties by code), Ambiguous last.
    pub rows: Vec<DistributionRow>,
    pub total: u64,
    pub classifiable: u64,
    pub classifiable_percent: String,
}

pub const DISTRIBUTION_ROUNDING: Rounding = Rounding::HalfEven;

pub fn distribution(mapping: &Mapping) -> Distribution {
    let mut counts = [0u64; 10];
    for c in mapping.values() {
        counts[c.index()] += 1;
    }
    let total = mapping.len() as u64;
    let pct = |n: u64| Ratio::new(n, total).percent(DISTRIBUTION_ROUNDING);
    let mut cats = Category::CLASSIFIABLE.to_vec();
    cats.sort_by(|a, b| counts[b.index()].cmp(&counts[a.index()]).then(a.code().cmp(b.code())));
    cats.push(Category::Ambiguous);
    let classifiable = total - counts[Category::Ambiguous.index()];
    Distribution {
        rows: cats
            .into_iter()
            .map(|c| DistributionRow {
                category: c,
                count: counts[c.index()],
                percent: pct(counts[c.index()]),
            })
            .collect(),
        total,
        classifiable,
        classifiable_percent: pct(classifiable),
    }
}

impl Distribution {
    pub fn count(&self, c: Category) -> u64 {
        self.rows.iter().find(|r| r.category == c).map_or(0, |r| r.count)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("category,count,percent\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.category.code(), r.count, r.percent));
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Category | Name | Count | Percentage |\n|---|---|---:|---:|\n");
        for r in self.rows.iter().filter(|r| r.category.is_classifiable()) {
            out.push_str(&format!(
                "| {} | {} | {} | {}% |\n",
                r.category.code(),
                r.category.name(),
                r.count,
                r.percent
            ));
        }
        out.push_str(&format!(
            "| **Classifiable** | | **{}** | **{}%** |\n",
            self.classifiable, self.classifiable_percent
        ));
        if let Some(r) = self.rows.iter().find(|r| r.category == Category::Ambiguous) {
            out.push_str(&format!("| Ambiguous | | {} | {}% |\n", r.count, r.percent));
        }
        let total_pct = if self.total == 0 { "n/a" } else { "100.0" };
        out.push_str(&format!("| **Total** | | **{}** | **{}%** |\n", self.total, total_pct));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TaskId;

    fn mapping(cats: &[Category]) -> Mapping {
        cats.iter()
            .enumerate()
            .map(|(i, &c)| (format!("{i:08x}").parse::<TaskId>().unwrap(), c))
            .collect()
    }

    #[test]
    fn default_levels() {
        assert_eq!(theoretical_affinity(Category::C1), Ok(AffinityLevel::High));
        assert_eq!(theoretical_affinity(Category::A2), Ok(AffinityLevel::VeryLow));
        assert_eq!(theoretical_affinity(Category::S3), Ok(AffinityLevel::Low));
        assert_eq!(theoretical_affinity(Category::A1), Ok(AffinityLevel::Low));
        for c in [Category::S1, Category::S2, Category::C2, Category::K1, Category::L1] {
            assert_eq!(theoretical_affinity(c), Ok(AffinityLevel::Medium));
        }
        assert_eq!(theoretical_affinity(Category::Ambiguous), Err(AffinityError::Ambiguous));
        assert!(AffinityLevel::VeryLow < AffinityLevel::Low && AffinityLevel::Medium < AffinityLevel::High);
    }

    #[test]
    fn overrides_replace_single_entries() {
        let m = AffinityMap::with_overrides_json(r#"{"A1": "very low", "S3": "Medium"}"#).unwrap();
        assert_eq!(m.level(Category::A1), Some(AffinityLevel::VeryLow));
        assert_eq!(m.level(Category::S3), Some(AffinityLevel::Medium));
        assert_eq!(m.level(Category::C1), Some(AffinityLevel::High));
        assert!(AffinityMap::with_overrides_json(r#"{"ambiguous": "Low"}"#).is_err());
        assert!(AffinityMap::with_overrides_json(r#"{"S1": "huge"}"#).is_err());
        assert!(AffinityMap::with_overrides_json("[").is_err());
    }

    #[test]
    fn band_boundaries_are_medium() {
        let band = |v| empirical_band(v).unwrap().band;
        assert_eq!(band(0.69), EmpiricalBand::Low);
        assert_eq!(band(0.70), EmpiricalBand::Medium);
        assert_eq!(band(0.85), EmpiricalBand::Medium);
        assert_eq!(band(0.86), EmpiricalBand::High);
        assert!(empirical_band(1.01).is_err());
        assert!(empirical_band(f64::NAN).is_err());
    }

    #[test]
    fn bias_small_cases() {
        let a = AffinityMap::default();
        let r = curriculum_bias(&mapping(&[Category::C1]), &a);
        assert_eq!(r.summary(), "0/1 = 0.0%");
        let r = curriculum_bias(&mapping(&[Category::S3, Category::A2]), &a);
        assert_eq!(r.summary(), "2/2 = 100.0%");
        let r = curriculum_bias(&mapping(&[Category::S3, Category::Ambiguous]), &a);
        assert_eq!(r.summary(), "1/2 = 50.0%");
        assert_eq!(r.low_categories, vec![Category::S3, Category::A1, Category::A2]);
    }

    #[test]
    fn distribution_of_single_task() {
        let d = distribution(&mapping(&[Category::K1]));
        assert_eq!(d.rows[0].category, Category::K1);
        assert_eq!(d.rows[0].percent, "100.0");
        assert_eq!(d.rows.last().unwrap().category, Category::Ambiguous);
        assert_eq!(d.rows.len(), 10);
    }

    #[test]
    fn distribution_csv_header() {
        let d = distribution(&mapping(&[Category::K1, Category::Ambiguous]));
        assert!(d.to_csv().starts_with("category,count,percent\nK1,1,50.0\n"));
        assert!(d.to_csv().ends_with("ambiguous,1,50.0\n"));
    }
}
