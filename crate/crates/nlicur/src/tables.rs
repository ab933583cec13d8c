//! Metrics, checkpoint-choice, rating and prediction files.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use nlicur_core::humaneval::{validate_ratings, RatingRecord, RatingSet};
use nlicur_core::metrics::{check_unique, MetricRecord, TextById};
use nlicur_core::selection::{CheckpointChoice, Criterion, EarlierReport};
use serde::Deserialize;

use crate::csvio::{to_csv, CsvTable};
use crate::error::{Error, Result};
use crate::fsio;

pub const METRICS_COLUMNS: [&str; 7] = [
    "model_id",
    "checkpoint_step",
    "language",
    "rouge_l",
    "nli",
    "length_ratio",
    "n_examples",
];

pub const CHOICES_COLUMNS: [&str; 5] = [
    "model_id",
    "criterion",
    "checkpoint_step",
    "criterion_mean",
    "n_languages",
];

pub const EARLIER_COLUMNS: [&str; 4] = ["model_id", "nli_step", "rouge_step", "nli_earlier"];

pub const RATINGS_COLUMNS: [&str; 7] = [
    "example_id",
    "language",
    "system_id",
    "rater_id",
    "quality",
    "attribution",
    "informativeness",
];

/// Full-precision value for intermediate files.
fn f6(v: f64) -> String {
    format!("{v:.6}")
}

pub fn metrics_csv(records: &[MetricRecord]) -> Vec<u8> {
    to_csv(
        &METRICS_COLUMNS,
        records.iter().map(|r| {
            [
                r.model_id.clone(),
                r.checkpoint_step.to_string(),
                r.language.clone(),
                f6(r.rouge_l),
                f6(r.nli),
                f6(r.length_ratio),
                r.n_examples.to_string(),
            ]
        }),
    )
}

pub fn read_metrics(path: impl AsRef<Path>) -> Result<Vec<MetricRecord>> {
    let table = CsvTable::read(path, &METRICS_COLUMNS)?;
    let records = table
        .rows()
        .map(|r| {
            let n_examples: u64 = r.parse("n_examples")?;
            if n_examples == 0 {
                return Err(r.schema(
                    "n_examples",
                    format!("line {}: must be at least 1", r.line()),
                ));
            }
            let length_ratio = r.float("length_ratio")?;
            if length_ratio < 0.0 {
                return Err(r.schema(
                    "length_ratio",
                    format!("line {}: must be non-negative", r.line()),
                ));
            }
            Ok(MetricRecord {
                model_id: r.str("model_id")?.to_string(),
                checkpoint_step: r.parse("checkpoint_step")?,
                language: nlicur_core::normalize_language_key(r.str("language")?),
                rouge_l: r.float("rouge_l")?,
                nli: r.float("nli")?,
                length_ratio,
                n_examples,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    check_unique(&records)
        .map_err(|e| Error::validation(format!("{}: {e}", table.path().display())))?;
    Ok(records)
}

pub fn choices_csv(choices: &[CheckpointChoice]) -> Vec<u8> {
    to_csv(
        &CHOICES_COLUMNS,
        choices.iter().map(|c| {
            [
                c.model_id.clone(),
                c.criterion.to_string(),
                c.checkpoint_step.to_string(),
                f6(c.criterion_mean),
                c.n_languages.to_string(),
            ]
        }),
    )
}

pub fn read_choices(path: impl AsRef<Path>) -> Result<Vec<CheckpointChoice>> {
    let table = CsvTable::read(path, &CHOICES_COLUMNS)?;
    table
        .rows()
        .map(|r| {
            Ok(CheckpointChoice {
                model_id: r.str("model_id")?.to_string(),
                criterion: r.parse::<Criterion>("criterion")?,
                checkpoint_step: r.parse("checkpoint_step")?,
                criterion_mean: r.float("criterion_mean")?,
                n_languages: r.parse("n_languages")?,
            })
        })
        .collect()
}

pub fn earlier_csv(reports: &[EarlierReport]) -> Vec<u8> {
    to_csv(
        &EARLIER_COLUMNS,
        reports.iter().map(|r| {
            [
                r.model_id.clone(),
                r.nli_step.to_string(),
                r.rouge_step.to_string(),
                r.nli_earlier.to_string(),
            ]
        }),
    )
}

pub fn read_ratings(path: impl AsRef<Path>) -> Result<RatingSet> {
    let table = CsvTable::read(path, &RATINGS_COLUMNS)?;
    let records = table
        .rows()
        .map(|r| {
            Ok(RatingRecord {
                example_id: r.str("example_id")?.to_string(),
                language: nlicur_core::normalize_language_key(r.str("language")?),
                system_id: r.str("system_id")?.to_string(),
                rater_id: r.str("rater_id")?.to_string(),
                quality: r.parse("quality")?,
                attribution: r.parse("attribution")?,
                informativeness: r.parse("informativeness")?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    validate_ratings(records)
        .map_err(|e| Error::validation(format!("{}: {e}", table.path().display())))
}

pub fn ratings_csv(records: &[RatingRecord]) -> Vec<u8> {
    to_csv(
        &RATINGS_COLUMNS,
        records.iter().map(|r| {
            [
                r.example_id.clone(),
                r.language.clone(),
                r.system_id.clone(),
                r.rater_id.clone(),
                r.quality.to_string(),
                r.attribution.to_string(),
                r.informativeness.to_string(),
            ]
        }),
    )
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TextLine {
    id: String,
    text: String,
}

/// Reads `{"id","text"}` lines into an id-keyed map. Duplicate ids and empty
/// files are errors.
pub fn read_texts(path: impl AsRef<Path>) -> Result<TextById> {
    let path = path.as_ref();
    let mut out = BTreeMap::new();
    for (i, line) in fsio::open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let t: TextLine = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, i as u64 + 1, e.to_string()))?;
        if out.insert(t.id.clone(), t.text).is_some() {
            return Err(Error::parse(
                path,
                i as u64 + 1,
                format!("duplicate id `{}`", t.id),
            ));
        }
    }
    if out.is_empty() {
        return Err(Error::validation(format!("{}: no records", path.display())));
    }
    Ok(out)
}

pub fn texts_jsonl(texts: &TextById) -> Vec<u8> {
    let mut out = Vec::new();
    for (id, text) in texts {
        out.extend_from_slice(
            format!(
                "{{\"id\":{},\"text\":{}}}\n",
                serde_json::to_string(id).expect("string"),
                serde_json::to_string(text).expect("string")
            )
            .as_bytes(),
        );
    }
    out
}
