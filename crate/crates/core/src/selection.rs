//! Checkpoint selection across languages.
//!
//! For each model, the chosen checkpoint maximizes the mean over languages of one
//! criterion. Equal means resolve to the earlier checkpoint.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::metrics::MetricRecord;
use crate::num::{mean, weighted_mean};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Criterion {
    Rouge,
    Nli,
}

impl Criterion {
    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Rouge => "rouge",
            Criterion::Nli => "nli",
        }
    }

    pub fn value(self, record: &MetricRecord) -> f64 {
        match self {
            Criterion::Rouge => record.rouge_l,
            Criterion::Nli => record.nli,
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for Criterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rouge" => Ok(Criterion::Rouge),
            "nli" => Ok(Criterion::Nli),
            other => Err(alloc::format!("unknown criterion `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    /// Every language counts once.
    #[default]
    Unweighted,
    /// Languages weighted by their number of evaluated examples.
    ByExamples,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointChoice {
    pub model_id: String,
    pub criterion: Criterion,
    pub checkpoint_step: u64,
    pub criterion_mean: f64,
    pub n_languages: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SelectionError {
    UnknownModel(String),
    /// `(checkpoint_step, language)` cells missing for the model.
    RaggedCoverage {
        model_id: String,
        missing: Vec<(u64, String)>,
    },
    MissingChoice {
        model_id: String,
        criterion: Criterion,
    },
}

impl fmt::Display for SelectionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectionError::UnknownModel(m) => write!(f, "no metrics rows for model `{m}`"),
            SelectionError::RaggedCoverage { model_id, missing } => {
                write!(f, "model `{model_id}` is missing metrics cells:")?;
                for (step, lang) in missing {
                    write!(f, " ({step}, {lang})")?;
                }
                Ok(())
            }
            SelectionError::MissingChoice {
                model_id,
                criterion,
            } => {
                write!(f, "no {criterion} checkpoint chosen for model `{model_id}`")
            }
        }
    }
}

impl core::error::Error for SelectionError {}

/// Language-sorted rows of one model, grouped by checkpoint step.
fn model_grid<'a>(
    records: &'a [MetricRecord],
    model_id: &str,
) -> Result<BTreeMap<u64, BTreeMap<&'a str, &'a MetricRecord>>, SelectionError> {
    let mut grid: BTreeMap<u64, BTreeMap<&str, &MetricRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.model_id == model_id) {
        grid.entry(r.checkpoint_step)
            .or_default()
            .insert(&r.language, r);
    }
    if grid.is_empty() {
        return Err(SelectionError::UnknownModel(String::from(model_id)));
    }
    let languages: BTreeSet<&str> = grid.values().flat_map(|row| row.keys().copied()).collect();
    let missing: Vec<(u64, String)> = grid
        .iter()
        .flat_map(|(&step, row)| {
            languages
                .iter()
                .filter(|l| !row.contains_key(*l))
                .map(move |l| (step, String::from(*l)))
        })
        .collect();
    if !missing.is_empty() {
        return Err(SelectionError::RaggedCoverage {
            model_id: String::from(model_id),
            missing,
        });
    }
    Ok(grid)
}

/// Mean of `criterion` over languages at every checkpoint of `model_id`, by step.
pub fn checkpoint_means(
    records: &[MetricRecord],
    model_id: &str,
    criterion: Criterion,
    weighting: Weighting,
) -> Result<BTreeMap<u64, f64>, SelectionError> {
    let grid = model_grid(records, model_id)?;
    Ok(grid
        .into_iter()
        .map(|(step, row)| {
            let m = match weighting {
                Weighting::Unweighted => mean(row.values().map(|r| criterion.value(r))),
                Weighting::ByExamples => weighted_mean(
                    row.values()
                        .map(|r| (criterion.value(r), r.n_examples as f64)),
                ),
            };
            (step, m.unwrap_or(f64::NEG_INFINITY))
        })
        .collect())
}

pub fn select_checkpoint(
    records: &[MetricRecord],
    model_id: &str,
    criterion: Criterion,
    weighting: Weighting,
) -> Result<CheckpointChoice, SelectionError> {
    let n_languages = model_grid(records, model_id)?
        .values()
        .next()
        .map_or(0, |row| row.len());
    let means = checkpoint_means(records, model_id, criterion, weighting)?;
    let mut best: Option<(u64, f64)> = None;
    // Ascending steps with a strict comparison keep the earliest of equal means.
    for (step, m) in means {
        if best.is_none_or(|(_, b)| m > b) {
            best = Some((step, m));
        }
    }
    let (checkpoint_step, criterion_mean) =
        best.ok_or_else(|| SelectionError::UnknownModel(String::from(model_id)))?;
    Ok(CheckpointChoice {
        model_id: String::from(model_id),
        criterion,
        checkpoint_step,
        criterion_mean,
        n_languages,
    })
}

/// Model ids present in the table, sorted.
pub fn models(records: &[MetricRecord]) -> Vec<String> {
    let set: BTreeSet<&str> = records.iter().map(|r| r.model_id.as_str()).collect();
    set.into_iter().map(String::from).collect()
}

/// Both criteria for every model in the table, ordered by model then criterion.
pub fn select_all(
    records: &[MetricRecord],
    weighting: Weighting,
) -> Result<Vec<CheckpointChoice>, SelectionError> {
    let mut out = Vec::new();
    for model in models(records) {
        for criterion in [Criterion::Rouge, Criterion::Nli] {
            out.push(select_checkpoint(records, &model, criterion, weighting)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EarlierReport {
    pub model_id: String,
    pub nli_step: u64,
    pub rouge_step: u64,
    /// `nli_step < rouge_step`.
    pub nli_earlier: bool,
}

/// Whether each model's best-NLI checkpoint precedes its best-ROUGE one.
pub fn best_nli_earlier_report(
    choices: &[CheckpointChoice],
) -> Result<Vec<EarlierReport>, SelectionError> {
    let mut by_model: BTreeMap<&str, (Option<u64>, Option<u64>)> = BTreeMap::new();
    for c in choices {
        let slot = by_model.entry(&c.model_id).or_default();
        match c.criterion {
            Criterion::Nli => slot.0 = Some(c.checkpoint_step),
            Criterion::Rouge => slot.1 = Some(c.checkpoint_step),
        }
    }
    by_model
        .into_iter()
        .map(|(model, steps)| match steps {
            (Some(nli_step), Some(rouge_step)) => Ok(EarlierReport {
                model_id: String::from(model),
                nli_step,
                rouge_step,
                nli_earlier: nli_step < rouge_step,
            }),
            (None, _) => Err(SelectionError::MissingChoice {
                model_id: String::from(model),
                criterion: Criterion::Nli,
            }),
            (_, None) => Err(SelectionError::MissingChoice {
                model_id: String::from(model),
                criterion: Criterion::Rouge,
            }),
        })
        .collect()
}
