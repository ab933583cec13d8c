//! Entailment scoring contract, the token-containment oracle, per-example
//! annotation and per-language entailment statistics.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::corpus::Example;
use crate::num::{mean, round2, round_to};

/// Default decision threshold on the entailment score.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Scores are stored with this many decimals.
pub const SCORE_DECIMALS: u32 = 6;

/// A premise (source document) and hypothesis (summary) to be scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pair<'a> {
    pub premise: &'a str,
    pub hypothesis: &'a str,
}

impl<'a> Pair<'a> {
    pub fn new(premise: &'a str, hypothesis: &'a str) -> Self {
        Self {
            premise,
            hypothesis,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScoreError {
    /// Pair at `index` has an empty (after trimming) premise or hypothesis.
    EmptyInput { index: usize },
    /// The backend could not be reached or kept failing.
    Unavailable(String),
    /// The backend answered with a non-retryable status.
    Rejected { status: u16, message: String },
    /// The backend returned a different number of scores than requested.
    LengthMismatch { expected: usize, got: usize },
    /// A returned score is not a finite number in [0, 1].
    OutOfRange { index: usize, value: f64 },
}

impl fmt::Display for ScoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScoreError::EmptyInput { index } => {
                write!(f, "pair {index} has an empty premise or hypothesis")
            }
            ScoreError::Unavailable(msg) => write!(f, "scorer unavailable: {msg}"),
            ScoreError::Rejected { status, message } => {
                write!(f, "scorer rejected request with status {status}: {message}")
            }
            ScoreError::LengthMismatch { expected, got } => write!(
                f,
                "protocol violation: requested {expected} scores, received {got}"
            ),
            ScoreError::OutOfRange { index, value } => {
                write!(
                    f,
                    "protocol violation: score {value} at position {index} is outside [0, 1]"
                )
            }
        }
    }
}

impl core::error::Error for ScoreError {}

impl ScoreError {
    /// True for errors caused by the remote peer breaking the wire contract.
    pub fn is_protocol_violation(&self) -> bool {
        matches!(
            self,
            ScoreError::LengthMismatch { .. } | ScoreError::OutOfRange { .. }
        )
    }
}

/// Estimates p(hypothesis is entailed by premise).
///
/// Implementations must be deterministic for a fixed configuration and safe to
/// call from several threads.
pub trait Scorer: Send + Sync {
    /// Identifier recorded next to every annotation.
    fn id(&self) -> &str;

    /// One score per pair, in request order.
    fn score_batch(&self, pairs: &[Pair<'_>]) -> Result<Vec<f64>, ScoreError>;

    fn score(&self, premise: &str, hypothesis: &str) -> Result<f64, ScoreError> {
        let mut scores = self.score_batch(&[Pair::new(premise, hypothesis)])?;
        match scores.len() {
            1 => Ok(scores.pop().unwrap_or_default()),
            got => Err(ScoreError::LengthMismatch { expected: 1, got }),
        }
    }
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn score_batch(&self, pairs: &[Pair<'_>]) -> Result<Vec<f64>, ScoreError> {
        (**self).score_batch(pairs)
    }
}

/// Deterministic stand-in for an NLI model: the fraction of distinct summary
/// tokens (whitespace split) that also occur in the document.
///
/// This measures lexical containment only and says nothing about entailment
/// quality. It exists so the pipeline can run end to end without a model.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleScorer;

impl OracleScorer {
    pub const ID: &'static str = "oracle-containment-v1";

    pub fn containment(document: &str, summary: &str) -> Option<f64> {
        let summary_tokens: BTreeSet<&str> = summary.split_whitespace().collect();
        if summary_tokens.is_empty() || document.trim().is_empty() {
            return None;
        }
        let document_tokens: BTreeSet<&str> = document.split_whitespace().collect();
        let hits = summary_tokens.intersection(&document_tokens).count();
        Some(hits as f64 / summary_tokens.len() as f64)
    }
}

impl Scorer for OracleScorer {
    fn id(&self) -> &str {
        Self::ID
    }

    fn score_batch(&self, pairs: &[Pair<'_>]) -> Result<Vec<f64>, ScoreError> {
        pairs
            .iter()
            .enumerate()
            .map(|(index, p)| {
                Self::containment(p.premise, p.hypothesis).ok_or(ScoreError::EmptyInput { index })
            })
            .collect()
    }
}

/// Decision threshold in the open interval (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Threshold(f64);

impl Threshold {
    pub fn new(value: f64) -> Result<Self, AnnotateError> {
        if value > 0.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(AnnotateError::InvalidThreshold(value))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// Strict: a score equal to the threshold is not entailed.
    pub fn is_entailed(self, score: f64) -> bool {
        score > self.0
    }
}

impl Default for Threshold {
    fn default() -> Self {
        Self(DEFAULT_THRESHOLD)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntailmentAnnotation {
    pub example_id: String,
    pub score: f64,
    pub entailed: bool,
    pub threshold: f64,
    pub scorer_id: String,
}

impl EntailmentAnnotation {
    /// Builds an annotation from a raw score, rounding it to the stored precision
    /// first so the flag stays consistent with the serialized value.
    pub fn from_score(
        example_id: impl Into<String>,
        raw_score: f64,
        threshold: Threshold,
        scorer_id: impl Into<String>,
    ) -> Self {
        let score = quantize_score(raw_score);
        Self {
            example_id: example_id.into(),
            score,
            entailed: threshold.is_entailed(score),
            threshold: threshold.get(),
            scorer_id: scorer_id.into(),
        }
    }
}

/// Rounds a score to [`SCORE_DECIMALS`] places.
pub fn quantize_score(score: f64) -> f64 {
    round_to(score, SCORE_DECIMALS)
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnnotateError {
    InvalidThreshold(f64),
    InvalidBatchSize,
    Scorer {
        example_id: String,
        source: ScoreError,
    },
}

impl fmt::Display for AnnotateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnnotateError::InvalidThreshold(t) => write!(f, "threshold {t} is not in (0, 1)"),
            AnnotateError::InvalidBatchSize => f.write_str("batch size must be at least 1"),
            AnnotateError::Scorer { example_id, source } => {
                write!(f, "scoring example `{example_id}`: {source}")
            }
        }
    }
}

impl core::error::Error for AnnotateError {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            AnnotateError::Scorer { source, .. } => Some(source),
            _ => None,
        }
    }
}

/// Scores one batch of examples (document as premise, summary as hypothesis).
pub fn annotate_batch<S: Scorer + ?Sized>(
    scorer: &S,
    examples: &[Example],
    threshold: Threshold,
) -> Result<Vec<EntailmentAnnotation>, AnnotateError> {
    if examples.is_empty() {
        return Ok(Vec::new());
    }
    let pairs: Vec<Pair<'_>> = examples
        .iter()
        .map(|e| Pair::new(&e.document, &e.summary))
        .collect();
    let attach = |source: ScoreError| {
        let example_id = match &source {
            ScoreError::EmptyInput { index } | ScoreError::OutOfRange { index, .. } => {
                examples.get(*index).unwrap_or(&examples[0]).id.clone()
            }
            _ => examples[0].id.clone(),
        };
        AnnotateError::Scorer { example_id, source }
    };
    let scores = scorer.score_batch(&pairs).map_err(attach)?;
    if scores.len() != examples.len() {
        return Err(attach(ScoreError::LengthMismatch {
            expected: examples.len(),
            got: scores.len(),
        }));
    }
    if let Some((index, &value)) = scores
        .iter()
        .enumerate()
        .find(|(_, s)| !(s.is_finite() && (0.0..=1.0).contains(*s)))
    {
        return Err(attach(ScoreError::OutOfRange { index, value }));
    }
    let scorer_id = scorer.id();
    Ok(examples
        .iter()
        .zip(scores)
        .map(|(e, s)| EntailmentAnnotation::from_score(e.id.clone(), s, threshold, scorer_id))
        .collect())
}

/// Annotates `examples` in corpus order, `batch_size` examples per scorer call.
pub fn annotate<S: Scorer + ?Sized>(
    scorer: &S,
    examples: &[Example],
    threshold: Threshold,
    batch_size: usize,
) -> Result<Vec<EntailmentAnnotation>, AnnotateError> {
    if batch_size == 0 {
        return Err(AnnotateError::InvalidBatchSize);
    }
    let mut out = Vec::with_capacity(examples.len());
    for chunk in examples.chunks(batch_size) {
        out.extend(annotate_batch(scorer, chunk, threshold)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LanguageStats {
    pub language: String,
    pub n_train: u64,
    pub n_entailed: u64,
    /// `100 * n_entailed / n_train`, rounded to 2 decimals.
    pub pct_entailed: f64,
}

/// Unweighted mean over the language rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AverageStats {
    pub n_train: f64,
    pub n_entailed: f64,
    pub pct_entailed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntailmentStats {
    /// Sorted by language key.
    pub rows: Vec<LanguageStats>,
    /// `None` for an empty corpus.
    pub average: Option<AverageStats>,
}

impl EntailmentStats {
    /// Builds the table from per-language `(n_train, n_entailed)` counts.
    pub fn from_counts(counts: &BTreeMap<String, (u64, u64)>) -> Self {
        let rows: Vec<LanguageStats> = counts
            .iter()
            .filter(|(_, &(n, _))| n > 0)
            .map(|(language, &(n_train, n_entailed))| LanguageStats {
                language: language.clone(),
                n_train,
                n_entailed,
                pct_entailed: round2(100.0 * n_entailed as f64 / n_train as f64),
            })
            .collect();
        let average = mean(rows.iter().map(|r| r.n_train as f64)).map(|n_train| AverageStats {
            n_train,
            n_entailed: mean(rows.iter().map(|r| r.n_entailed as f64)).unwrap_or(0.0),
            pct_entailed: round2(mean(rows.iter().map(|r| r.pct_entailed)).unwrap_or(0.0)),
        });
        Self { rows, average }
    }

    pub fn total_entailed(&self) -> u64 {
        self.rows.iter().map(|r| r.n_entailed).sum()
    }

    pub fn row(&self, language: &str) -> Option<&LanguageStats> {
        self.rows.iter().find(|r| r.language == language)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StatsError {
    MissingAnnotation(String),
    DuplicateAnnotation(String),
    UnknownExample(String),
}

impl fmt::Display for StatsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatsError::MissingAnnotation(id) => write!(f, "example `{id}` has no annotation"),
            StatsError::DuplicateAnnotation(id) => {
                write!(f, "example `{id}` is annotated more than once")
            }
            StatsError::UnknownExample(id) => write!(f, "annotation for `{id}` matches no example"),
        }
    }
}

impl core::error::Error for StatsError {}

/// Indexes annotations by example id, rejecting duplicates.
pub fn index_annotations(
    annotations: &[EntailmentAnnotation],
) -> Result<BTreeMap<&str, &EntailmentAnnotation>, StatsError> {
    let mut index = BTreeMap::new();
    for a in annotations {
        if index.insert(a.example_id.as_str(), a).is_some() {
            return Err(StatsError::DuplicateAnnotation(a.example_id.clone()));
        }
    }
    Ok(index)
}

/// Per-language entailment counts for a corpus and its annotations.
pub fn stats(
    examples: &[Example],
    annotations: &[EntailmentAnnotation],
) -> Result<EntailmentStats, StatsError> {
    let index = index_annotations(annotations)?;
    let mut counts: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for ex in examples {
        let ann = index
            .get(ex.id.as_str())
            .ok_or_else(|| StatsError::MissingAnnotation(ex.id.clone()))?;
        seen.insert(ex.id.as_str());
        let entry = counts.entry(ex.language.clone()).or_insert((0, 0));
        entry.0 += 1;
        entry.1 += ann.entailed as u64;
    }
    if let Some(extra) = index.keys().find(|id| !seen.contains(*id)) {
        return Err(StatsError::UnknownExample(extra.to_string()));
    }
    Ok(EntailmentStats::from_counts(&counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn ex(id: &str, lang: &str, doc: &str, sum: &str) -> Example {
        Example::new(id, lang, doc, sum)
    }

    #[test]
    fn oracle_containment_values() {
        let o = OracleScorer;
        assert_eq!(o.score("a b c", "c a").unwrap(), 1.0);
        assert_eq!(o.score("a b c", "x y").unwrap(), 0.0);
        assert_eq!(o.score("a b", "a b c d").unwrap(), 0.5);
        assert_eq!(o.score("", "a"), Err(ScoreError::EmptyInput { index: 0 }));
        assert_eq!(o.score("a", "  "), Err(ScoreError::EmptyInput { index: 0 }));
    }

    /// Scorer returning fixed values in order, for threshold tests.
    struct Fixed(Vec<f64>);

    impl Scorer for Fixed {
        fn id(&self) -> &str {
            "fixed"
        }
        fn score_batch(&self, pairs: &[Pair<'_>]) -> Result<Vec<f64>, ScoreError> {
            // The premise carries the index into the fixed table.
            Ok(pairs
                .iter()
                .map(|p| self.0[p.premise.parse::<usize>().unwrap()])
                .collect())
        }
    }

    #[test]
    fn threshold_is_strict() {
        let scorer = Fixed(vec![0.9, 0.5, 0.2]);
        let exs = vec![
            ex("a", "x", "0", "s"),
            ex("b", "x", "1", "s"),
            ex("c", "x", "2", "s"),
        ];
        let anns = annotate(&scorer, &exs, Threshold::default(), 2).unwrap();
        let flags: Vec<bool> = anns.iter().map(|a| a.entailed).collect();
        assert_eq!(flags, vec![true, false, false]);
    }

    #[test]
    fn empty_corpus_and_bad_parameters() {
        assert!(annotate(&OracleScorer, &[], Threshold::default(), 1)
            .unwrap()
            .is_empty());
        assert_eq!(
            annotate(&OracleScorer, &[], Threshold::default(), 0),
            Err(AnnotateError::InvalidBatchSize)
        );
        assert!(Threshold::new(0.0).is_err());
        assert!(Threshold::new(1.0).is_err());
        assert!(Threshold::new(f64::NAN).is_err());
    }

    #[test]
    fn scorer_errors_carry_example_id() {
        let exs = vec![ex("ok", "x", "a", "a"), ex("bad", "x", "a", "a")];
        let mut exs2 = exs.clone();
        exs2[1].summary = " ".into();
        let err = annotate(&OracleScorer, &exs2, Threshold::default(), 5).unwrap_err();
        match err {
            AnnotateError::Scorer { example_id, .. } => assert_eq!(example_id, "bad"),
            other => panic!("unexpected {other:?}"),
        }
    }

    struct Short;
    impl Scorer for Short {
        fn id(&self) -> &str {
            "short"
        }
        fn score_batch(&self, pairs: &[Pair<'_>]) -> Result<Vec<f64>, ScoreError> {
            Ok(vec![0.5; pairs.len().saturating_sub(1)])
        }
    }

    #[test]
    fn length_mismatch_detected() {
        let exs = vec![ex("a", "x", "d", "s"), ex("b", "x", "d", "s")];
        let err = annotate(&Short, &exs, Threshold::default(), 2).unwrap_err();
        assert!(matches!(
            err,
            AnnotateError::Scorer {
                source: ScoreError::LengthMismatch {
                    expected: 2,
                    got: 1
                },
                ..
            }
        ));
    }

    #[test]
    fn stats_table_one_anchors() {
        let mut counts = BTreeMap::new();
        counts.insert("amharic".to_string(), (5_761, 2_458));
        counts.insert("punjabi".to_string(), (8_215, 2_324));
        let s = EntailmentStats::from_counts(&counts);
        assert_eq!(s.row("amharic").unwrap().pct_entailed, 42.67);
        assert_eq!(s.row("punjabi").unwrap().pct_entailed, 28.29);
        assert_eq!(s.rows[0].language, "amharic");
    }

    #[test]
    fn stats_single_language_all_entailed() {
        let exs = vec![ex("a", "x", "d e", "d"), ex("b", "x", "d e", "e")];
        let anns = annotate(&OracleScorer, &exs, Threshold::default(), 1).unwrap();
        let s = stats(&exs, &anns).unwrap();
        assert_eq!(s.rows[0].pct_entailed, 100.0);
        let avg = s.average.unwrap();
        assert_eq!(avg.pct_entailed, 100.0);
        assert_eq!(avg.n_train, 2.0);
        assert_eq!(avg.n_entailed, 2.0);
    }

    #[test]
    fn stats_join_errors() {
        let exs = vec![ex("a", "x", "d", "d")];
        let ann = EntailmentAnnotation::from_score("a", 1.0, Threshold::default(), "o");
        assert_eq!(
            stats(&exs, &[]),
            Err(StatsError::MissingAnnotation("a".into()))
        );
        assert_eq!(
            stats(&exs, &[ann.clone(), ann.clone()]),
            Err(StatsError::DuplicateAnnotation("a".into()))
        );
        let mut other = ann.clone();
        other.example_id = "zz".into();
        assert_eq!(
            stats(&exs, &[ann, other]),
            Err(StatsError::UnknownExample("zz".into()))
        );
    }

    #[test]
    fn quantized_flag_consistent() {
        let a = EntailmentAnnotation::from_score("a", 0.500_000_1, Threshold::default(), "o");
        assert_eq!(a.score, 0.5);
        assert!(!a.entailed);
    }
}
