//! Entailment-driven curation of summarization corpora, plus the automatic and
//! human evaluation stack used to compare the resulting models.
//!
//! This crate is `no_std` (it needs `alloc`). It holds the data model and every
//! algorithm: tokenization, ROUGE-L, the entailment scorer contract and its
//! token-containment oracle, the curation recipes, checkpoint selection,
//! language-group aggregation and human-rating scoring. File formats, the remote
//! scoring client and the command line live in the `nlicur` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod aggregate;
pub mod corpus;
pub mod curation;
pub mod entailment;
pub mod humaneval;
pub mod metrics;
pub mod num;
pub mod rouge;
pub mod selection;
pub mod tokenize;

pub use corpus::{
    normalize_language_key, Example, LanguageProfile, ProfileTable, ResourceTier, TierThresholds,
};
pub use curation::{ControlTokens, CurationOutput, Recipe};
pub use entailment::{EntailmentAnnotation, EntailmentStats, OracleScorer, ScoreError, Scorer};
pub use metrics::MetricRecord;
pub use rouge::{rouge_l, RougeScore};
pub use selection::{CheckpointChoice, Criterion};
pub use tokenize::{Tokenizer, Vocab};
