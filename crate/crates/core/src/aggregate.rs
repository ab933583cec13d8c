//! Averages of the chosen checkpoints' metrics over language groups.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::corpus::{ProfileTable, ResourceTier};
use crate::metrics::MetricRecord;
use crate::num::mean;
use crate::selection::{CheckpointChoice, Criterion};

/// Family groups smaller than this are left out of the family report rows.
pub const DEFAULT_MIN_FAMILY_SIZE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Grouping {
    Tier,
    Family,
    Xnli,
}

impl Grouping {
    pub const ALL: [Grouping; 3] = [Grouping::Tier, Grouping::Family, Grouping::Xnli];

    pub fn as_str(self) -> &'static str {
        match self {
            Grouping::Tier => "tier",
            Grouping::Family => "family",
            Grouping::Xnli => "xnli",
        }
    }
}

impl fmt::Display for Grouping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const XNLI_GROUP: &str = "xnli";
pub const NON_XNLI_GROUP: &str = "non-xnli";

/// One report column: a model evaluated at its checkpoint for one criterion.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SystemColumn {
    pub model_id: String,
    pub criterion: Criterion,
    pub checkpoint_step: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricTriple {
    pub rouge_l: f64,
    pub nli: f64,
    pub length_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupRow {
    pub name: String,
    pub n_languages: usize,
    /// One entry per report column.
    pub values: Vec<MetricTriple>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupReport {
    pub grouping: Grouping,
    pub columns: Vec<SystemColumn>,
    pub rows: Vec<GroupRow>,
    /// Mean over every language, omitted groups included.
    pub footer: GroupRow,
    /// Groups left out of `rows` for being too small.
    pub omitted: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AggregateError {
    MissingProfile(String),
    MissingCell {
        model_id: String,
        checkpoint_step: u64,
        language: String,
    },
    NoColumns,
}

impl fmt::Display for AggregateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AggregateError::MissingProfile(l) => write!(f, "language `{l}` has no profile"),
            AggregateError::MissingCell {
                model_id,
                checkpoint_step,
                language,
            } => write!(
                f,
                "no metrics for ({model_id}, {checkpoint_step}, {language})"
            ),
            AggregateError::NoColumns => f.write_str("no checkpoint choices to report"),
        }
    }
}

impl core::error::Error for AggregateError {}

/// Columns in model order, ROUGE-selected before NLI-selected.
pub fn columns_from_choices(choices: &[CheckpointChoice]) -> Vec<SystemColumn> {
    let mut cols: Vec<SystemColumn> = choices
        .iter()
        .map(|c| SystemColumn {
            model_id: c.model_id.clone(),
            criterion: c.criterion,
            checkpoint_step: c.checkpoint_step,
        })
        .collect();
    cols.sort();
    cols.dedup();
    cols
}

/// Group name of `language` under `grouping`.
pub fn group_of(
    profiles: &ProfileTable,
    language: &str,
    grouping: Grouping,
) -> Result<String, AggregateError> {
    let p = profiles
        .get(language)
        .ok_or_else(|| AggregateError::MissingProfile(String::from(language)))?;
    Ok(match grouping {
        Grouping::Tier => String::from(p.resource_tier.as_str()),
        Grouping::Family => p.family.clone(),
        Grouping::Xnli => String::from(if p.xnli_member {
            XNLI_GROUP
        } else {
            NON_XNLI_GROUP
        }),
    })
}

/// Members of every group, each group in canonical report order.
pub fn partition<'a, I>(
    languages: I,
    profiles: &ProfileTable,
    grouping: Grouping,
) -> Result<Vec<(String, Vec<String>)>, AggregateError>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for lang in languages {
        groups
            .entry(group_of(profiles, lang, grouping)?)
            .or_default()
            .push(String::from(lang));
    }
    let mut ordered: Vec<(String, Vec<String>)> = groups.into_iter().collect();
    match grouping {
        Grouping::Tier => ordered.sort_by_key(|(name, _)| {
            ResourceTier::ALL
                .iter()
                .position(|t| t.as_str() == name)
                .unwrap_or(usize::MAX)
        }),
        Grouping::Family => {
            ordered.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then_with(|| a.0.cmp(&b.0)))
        }
        Grouping::Xnli => ordered.sort_by_key(|(name, _)| name != XNLI_GROUP),
    }
    Ok(ordered)
}

fn cell<'a>(
    cells: &BTreeMap<(&str, u64, &str), &'a MetricRecord>,
    col: &SystemColumn,
    language: &str,
) -> Result<&'a MetricRecord, AggregateError> {
    cells
        .get(&(col.model_id.as_str(), col.checkpoint_step, language))
        .copied()
        .ok_or_else(|| AggregateError::MissingCell {
            model_id: col.model_id.clone(),
            checkpoint_step: col.checkpoint_step,
            language: String::from(language),
        })
}

fn mean_row(
    name: String,
    members: &[&str],
    columns: &[SystemColumn],
    cells: &BTreeMap<(&str, u64, &str), &MetricRecord>,
) -> Result<GroupRow, AggregateError> {
    let mut values = Vec::with_capacity(columns.len());
    for col in columns {
        let recs = members
            .iter()
            .map(|l| cell(cells, col, l))
            .collect::<Result<Vec<_>, _>>()?;
        values.push(MetricTriple {
            rouge_l: mean(recs.iter().map(|r| r.rouge_l)).unwrap_or(0.0),
            nli: mean(recs.iter().map(|r| r.nli)).unwrap_or(0.0),
            length_ratio: mean(recs.iter().map(|r| r.length_ratio)).unwrap_or(0.0),
        });
    }
    Ok(GroupRow {
        name,
        n_languages: members.len(),
        values,
    })
}

/// Unweighted per-group means of every column's metrics.
///
/// Languages are those present in `records` for any chosen column. Family groups
/// with fewer than `min_family_size` members are omitted from the rows.
pub fn group_average(
    records: &[MetricRecord],
    choices: &[CheckpointChoice],
    profiles: &ProfileTable,
    grouping: Grouping,
    min_family_size: usize,
) -> Result<GroupReport, AggregateError> {
    let columns = columns_from_choices(choices);
    if columns.is_empty() {
        return Err(AggregateError::NoColumns);
    }
    let chosen: BTreeSet<(&str, u64)> = columns
        .iter()
        .map(|c| (c.model_id.as_str(), c.checkpoint_step))
        .collect();
    let cells: BTreeMap<(&str, u64, &str), &MetricRecord> = records
        .iter()
        .filter(|r| chosen.contains(&(r.model_id.as_str(), r.checkpoint_step)))
        .map(|r| {
            (
                (r.model_id.as_str(), r.checkpoint_step, r.language.as_str()),
                r,
            )
        })
        .collect();
    let languages: BTreeSet<&str> = cells.keys().map(|k| k.2).collect();

    let groups = partition(languages.iter().copied(), profiles, grouping)?;
    let mut rows = Vec::new();
    let mut omitted = Vec::new();
    for (name, members) in groups {
        if grouping == Grouping::Family && members.len() < min_family_size {
            omitted.push(name);
            continue;
        }
        let members: Vec<&str> = members.iter().map(String::as_str).collect();
        rows.push(mean_row(name, &members, &columns, &cells)?);
    }
    let all: Vec<&str> = languages.into_iter().collect();
    let footer = mean_row(String::from("average"), &all, &columns, &cells)?;
    Ok(GroupReport {
        grouping,
        columns,
        rows,
        footer,
        omitted,
    })
}
