//! Corpus-level automatic metrics: ROUGE-L, NLI rate and length ratio.
//!
//! Inputs are keyed by example id in `BTreeMap`s; every mean is reduced in
//! sorted-id order with compensated summation, so callers that compute
//! per-example values in parallel get bitwise-identical results.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::entailment::{Pair, ScoreError, Scorer, Threshold};
use crate::num::mean;
use crate::rouge::rouge_l;
use crate::tokenize::Tokenizer;

pub type TextById = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub model_id: String,
    pub checkpoint_step: u64,
    pub language: String,
    /// ROUGE-L F, ×100.
    pub rouge_l: f64,
    /// Entailed fraction, ×100.
    pub nli: f64,
    pub length_ratio: f64,
    pub n_examples: u64,
}

impl MetricRecord {
    pub fn key(&self) -> (&str, u64, &str) {
        (&self.model_id, self.checkpoint_step, &self.language)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NliMode {
    /// Percentage of predictions scored strictly above the threshold.
    #[default]
    Binary,
    /// Mean raw score, ×100.
    MeanScore,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetricsError {
    IdMismatch {
        only_left: Vec<String>,
        only_right: Vec<String>,
    },
    Empty,
    ZeroLengthReference(Vec<String>),
    Scorer {
        example_id: String,
        source: ScoreError,
    },
    DuplicateRecord {
        model_id: String,
        checkpoint_step: u64,
        language: String,
    },
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::IdMismatch {
                only_left,
                only_right,
            } => write!(
                f,
                "id sets differ: {} only in predictions {:?}, {} only in the other input {:?}",
                only_left.len(),
                only_left,
                only_right.len(),
                only_right
            ),
            MetricsError::Empty => f.write_str("no examples to evaluate"),
            MetricsError::ZeroLengthReference(ids) => {
                write!(f, "references with zero tokens: {ids:?}")
            }
            MetricsError::Scorer { example_id, source } => {
                write!(f, "scoring `{example_id}`: {source}")
            }
            MetricsError::DuplicateRecord {
                model_id,
                checkpoint_step,
                language,
            } => write!(
                f,
                "duplicate metrics row ({model_id}, {checkpoint_step}, {language})"
            ),
        }
    }
}

impl core::error::Error for MetricsError {}

/// Fails with the symmetric difference when the two maps have different keys.
pub fn check_aligned<A, B>(
    left: &BTreeMap<String, A>,
    right: &BTreeMap<String, B>,
) -> Result<(), MetricsError> {
    let l: BTreeSet<&String> = left.keys().collect();
    let r: BTreeSet<&String> = right.keys().collect();
    if l == r {
        if l.is_empty() {
            return Err(MetricsError::Empty);
        }
        return Ok(());
    }
    Err(MetricsError::IdMismatch {
        only_left: l.difference(&r).map(|s| (*s).clone()).collect(),
        only_right: r.difference(&l).map(|s| (*s).clone()).collect(),
    })
}

/// ROUGE-L F of one prediction against its reference.
pub fn example_rouge(prediction: &str, reference: &str, tokenizer: &Tokenizer, beta: f64) -> f64 {
    rouge_l(
        &tokenizer.tokenize(prediction),
        &tokenizer.tokenize(reference),
        beta,
    )
    .f
}

/// Mean of per-example values in their iteration order, ×100.
pub fn percent_mean<I: IntoIterator<Item = f64>>(values: I) -> Option<f64> {
    mean(values).map(|m| 100.0 * m)
}

/// Mean per-example ROUGE-L F ×100.
pub fn corpus_rouge(
    predictions: &TextById,
    references: &TextById,
    tokenizer: &Tokenizer,
    beta: f64,
) -> Result<f64, MetricsError> {
    check_aligned(predictions, references)?;
    let values = predictions
        .iter()
        .map(|(id, p)| example_rouge(p, &references[id], tokenizer, beta));
    percent_mean(values).ok_or(MetricsError::Empty)
}

/// Per-example entailment scores of predictions against their documents,
/// in sorted-id order.
pub fn nli_scores<S: Scorer + ?Sized>(
    predictions: &TextById,
    documents: &TextById,
    scorer: &S,
    batch_size: usize,
) -> Result<Vec<f64>, MetricsError> {
    check_aligned(predictions, documents)?;
    let ids: Vec<&String> = predictions.keys().collect();
    let mut scores = Vec::with_capacity(ids.len());
    for chunk in ids.chunks(batch_size.max(1)) {
        let pairs: Vec<Pair<'_>> = chunk
            .iter()
            .map(|id| Pair::new(&documents[*id], &predictions[*id]))
            .collect();
        let got = scorer.score_batch(&pairs).map_err(|source| {
            let idx = match &source {
                ScoreError::EmptyInput { index } | ScoreError::OutOfRange { index, .. } => *index,
                _ => 0,
            };
            MetricsError::Scorer {
                example_id: String::clone(chunk.get(idx).unwrap_or(&chunk[0])),
                source,
            }
        })?;
        if got.len() != chunk.len() {
            return Err(MetricsError::Scorer {
                example_id: chunk[0].clone(),
                source: ScoreError::LengthMismatch {
                    expected: chunk.len(),
                    got: got.len(),
                },
            });
        }
        scores.extend(got);
    }
    Ok(scores)
}

/// Reduces per-example scores to the NLI rate (×100).
pub fn nli_rate(scores: &[f64], threshold: Threshold, mode: NliMode) -> Option<f64> {
    match mode {
        NliMode::Binary => {
            percent_mean(
                scores
                    .iter()
                    .map(|&s| if threshold.is_entailed(s) { 1.0 } else { 0.0 }),
            )
        }
        NliMode::MeanScore => percent_mean(scores.iter().copied()),
    }
}

pub fn corpus_nli<S: Scorer + ?Sized>(
    predictions: &TextById,
    documents: &TextById,
    scorer: &S,
    threshold: Threshold,
    mode: NliMode,
) -> Result<f64, MetricsError> {
    let scores = nli_scores(predictions, documents, scorer, 64)?;
    nli_rate(&scores, threshold, mode).ok_or(MetricsError::Empty)
}

/// Mean over examples of `|tokens(prediction)| / |tokens(reference)|`.
pub fn length_ratio(
    predictions: &TextById,
    references: &TextById,
    tokenizer: &Tokenizer,
) -> Result<f64, MetricsError> {
    check_aligned(predictions, references)?;
    let mut ratios = Vec::with_capacity(predictions.len());
    let mut zero = Vec::new();
    for (id, p) in predictions {
        let r = tokenizer.count(&references[id]);
        if r == 0 {
            zero.push(id.clone());
            continue;
        }
        ratios.push(tokenizer.count(p) as f64 / r as f64);
    }
    if !zero.is_empty() {
        return Err(MetricsError::ZeroLengthReference(zero));
    }
    mean(ratios).ok_or(MetricsError::Empty)
}

/// Rejects tables with a repeated `(model_id, checkpoint_step, language)`.
pub fn check_unique(records: &[MetricRecord]) -> Result<(), MetricsError> {
    let mut seen = BTreeSet::new();
    for r in records {
        if !seen.insert(r.key()) {
            return Err(MetricsError::DuplicateRecord {
                model_id: r.model_id.clone(),
                checkpoint_step: r.checkpoint_step,
                language: r.language.clone(),
            });
        }
    }
    Ok(())
}
