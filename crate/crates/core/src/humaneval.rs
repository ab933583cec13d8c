//! Human ratings: validation and per-system positive rates.
//!
//! Every individual rating counts (no majority vote). Rates are computed per
//! language first; a system's overall rate is the unweighted mean over languages.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::num::mean;

/// Raters expected per (example, system) item.
pub const EXPECTED_RATERS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatingRecord {
    pub example_id: String,
    pub language: String,
    pub system_id: String,
    pub rater_id: String,
    /// 1 incomprehensible, 2 somewhat comprehensible, 3 comprehensible.
    pub quality: u8,
    /// 1 when fully attributable to the article.
    pub attribution: u8,
    /// 1 when judged a good summary.
    pub informativeness: u8,
}

impl RatingRecord {
    pub fn validate(&self) -> Result<(), RatingError> {
        let bad = |field: &'static str, value: u8| RatingError::OutOfRange {
            example_id: self.example_id.clone(),
            rater_id: self.rater_id.clone(),
            field,
            value,
        };
        if !(1..=3).contains(&self.quality) {
            return Err(bad("quality", self.quality));
        }
        if self.attribution > 1 {
            return Err(bad("attribution", self.attribution));
        }
        if self.informativeness > 1 {
            return Err(bad("informativeness", self.informativeness));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RatingError {
    OutOfRange {
        example_id: String,
        rater_id: String,
        field: &'static str,
        value: u8,
    },
    Duplicate {
        example_id: String,
        system_id: String,
        rater_id: String,
    },
    Empty,
}

impl fmt::Display for RatingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RatingError::OutOfRange {
                example_id,
                rater_id,
                field,
                value,
            } => write!(
                f,
                "rating by `{rater_id}` on `{example_id}`: {field}={value} is out of range"
            ),
            RatingError::Duplicate {
                example_id,
                system_id,
                rater_id,
            } => write!(
                f,
                "duplicate rating ({example_id}, {system_id}, {rater_id})"
            ),
            RatingError::Empty => f.write_str("no ratings"),
        }
    }
}

impl core::error::Error for RatingError {}

/// An (example, system) item whose rater count differs from [`EXPECTED_RATERS`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RaterCountWarning {
    pub example_id: String,
    pub system_id: String,
    pub raters: usize,
}

impl fmt::Display for RaterCountWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "item ({}, {}) has {} raters, expected {}",
            self.example_id, self.system_id, self.raters, EXPECTED_RATERS
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatingSet {
    pub records: Vec<RatingRecord>,
    pub warnings: Vec<RaterCountWarning>,
}

/// Rejects out-of-range values and duplicate `(example, system, rater)` keys,
/// and flags items that do not have exactly three raters.
pub fn validate_ratings(records: Vec<RatingRecord>) -> Result<RatingSet, RatingError> {
    let mut raters: BTreeMap<(&str, &str), Vec<&str>> = BTreeMap::new();
    for r in &records {
        r.validate()?;
        let list = raters.entry((&r.example_id, &r.system_id)).or_default();
        if list.contains(&r.rater_id.as_str()) {
            return Err(RatingError::Duplicate {
                example_id: r.example_id.clone(),
                system_id: r.system_id.clone(),
                rater_id: r.rater_id.clone(),
            });
        }
        list.push(&r.rater_id);
    }
    let warnings = raters
        .iter()
        .filter(|(_, list)| list.len() != EXPECTED_RATERS)
        .map(|((example_id, system_id), list)| RaterCountWarning {
            example_id: String::from(*example_id),
            system_id: String::from(*system_id),
            raters: list.len(),
        })
        .collect();
    Ok(RatingSet { records, warnings })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QualityMode {
    /// Fraction of ratings equal to 3.
    #[default]
    TopLabel,
    /// Mean of `(q - 1) / 2`.
    NormalizedMean,
}

impl QualityMode {
    pub fn value(self, quality: u8) -> f64 {
        match self {
            QualityMode::TopLabel => f64::from(u8::from(quality == 3)),
            QualityMode::NormalizedMean => f64::from(quality.saturating_sub(1)) / 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub quality: f64,
    pub attribution: f64,
    pub informativeness: f64,
    pub n_ratings: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemScores {
    pub system_id: String,
    pub per_language: BTreeMap<String, Rates>,
    /// Unweighted mean of the per-language rates; `n_ratings` is the total.
    pub overall: Rates,
}

fn rates(records: &[&RatingRecord], mode: QualityMode) -> Rates {
    Rates {
        quality: mean(records.iter().map(|r| mode.value(r.quality))).unwrap_or(0.0),
        attribution: mean(records.iter().map(|r| f64::from(r.attribution))).unwrap_or(0.0),
        informativeness: mean(records.iter().map(|r| f64::from(r.informativeness))).unwrap_or(0.0),
        n_ratings: records.len(),
    }
}

/// Per-system rates, sorted by system id.
pub fn score_systems(set: &RatingSet, mode: QualityMode) -> Result<Vec<SystemScores>, RatingError> {
    if set.records.is_empty() {
        return Err(RatingError::Empty);
    }
    // Sort inside each cell so record order cannot affect the sums.
    let mut cells: BTreeMap<&str, BTreeMap<&str, Vec<&RatingRecord>>> = BTreeMap::new();
    for r in &set.records {
        cells
            .entry(&r.system_id)
            .or_default()
            .entry(&r.language)
            .or_default()
            .push(r);
    }
    Ok(cells
        .into_iter()
        .map(|(system, langs)| {
            let per_language: BTreeMap<String, Rates> = langs
                .into_iter()
                .map(|(lang, mut recs)| {
                    recs.sort_by(|a, b| {
                        (&a.example_id, &a.rater_id).cmp(&(&b.example_id, &b.rater_id))
                    });
                    (String::from(lang), rates(&recs, mode))
                })
                .collect();
            let overall = Rates {
                quality: mean(per_language.values().map(|r| r.quality)).unwrap_or(0.0),
                attribution: mean(per_language.values().map(|r| r.attribution)).unwrap_or(0.0),
                informativeness: mean(per_language.values().map(|r| r.informativeness))
                    .unwrap_or(0.0),
                n_ratings: per_language.values().map(|r| r.n_ratings).sum(),
            };
            SystemScores {
                system_id: String::from(system),
                per_language,
                overall,
            }
        })
        .collect())
}
