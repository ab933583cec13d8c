//! Derived training sets: entailment filtering, control-token augmentation,
//! inference-time prefixing, and the random and self-ROUGE selection baselines.
//!
//! Every recipe emits examples in source order and tallies the emitted
//! examples per language, including languages that end up with zero.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use sha2::{Digest, Sha256};

use crate::corpus::Example;
use crate::entailment::{index_annotations, EntailmentAnnotation, StatsError, Threshold};
use crate::rouge::rouge_l;
use crate::tokenize::Tokenizer;

/// Name and version of the seeded generator behind [`random_select`].
/// Changing the derivation or sampling procedure must bump this string.
pub const SELECTION_GENERATOR: &str = "chacha8-sha256seed-fisheryates/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Recipe {
    Vanilla,
    Filtered,
    Controlled,
    Random,
    SelfRouge,
    /// Documents prefixed with the positive control token for decoding.
    Inference,
}

impl Recipe {
    pub fn as_str(self) -> &'static str {
        match self {
            Recipe::Vanilla => "vanilla",
            Recipe::Filtered => "filtered",
            Recipe::Controlled => "controlled",
            Recipe::Random => "random",
            Recipe::SelfRouge => "self_rouge",
            Recipe::Inference => "inference",
        }
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for Recipe {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "vanilla" => Recipe::Vanilla,
            "filtered" => Recipe::Filtered,
            "controlled" => Recipe::Controlled,
            "random" => Recipe::Random,
            "self_rouge" | "self-rouge" => Recipe::SelfRouge,
            "inference" => Recipe::Inference,
            other => return Err(format!("unknown recipe `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlTokens {
    pub pos: String,
    pub neg: String,
}

impl Default for ControlTokens {
    fn default() -> Self {
        Self {
            pos: String::from("<entailed>"),
            neg: String::from("<not-entailed>"),
        }
    }
}

impl ControlTokens {
    pub fn validate(&self) -> Result<(), CurationError> {
        if self.pos.is_empty() || self.neg.is_empty() {
            return Err(CurationError::InvalidTokens(
                "control tokens must be non-empty",
            ));
        }
        if self.pos == self.neg {
            return Err(CurationError::InvalidTokens(
                "positive and negative tokens must differ",
            ));
        }
        if self.pos.contains(char::is_whitespace) || self.neg.contains(char::is_whitespace) {
            return Err(CurationError::InvalidTokens(
                "control tokens must not contain whitespace",
            ));
        }
        Ok(())
    }

    /// Removes a leading control token and its separating space.
    pub fn strip<'a>(&self, document: &'a str) -> Option<&'a str> {
        [&self.pos, &self.neg]
            .into_iter()
            .find_map(|tok| document.strip_prefix(tok.as_str())?.strip_prefix(' '))
    }
}

/// `token + " " + document`.
pub fn prefix_document(token: &str, document: &str) -> String {
    let mut out = String::with_capacity(token.len() + 1 + document.len());
    out.push_str(token);
    out.push(' ');
    out.push_str(document);
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Warning {
    /// A source document already starts with a control token.
    TokenCollision { example_id: String, token: String },
    /// Nothing passed the filter.
    EmptySelection,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::TokenCollision { example_id, token } => {
                write!(
                    f,
                    "document of `{example_id}` already starts with `{token}`"
                )
            }
            Warning::EmptySelection => f.write_str("no example was selected"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CollisionPolicy {
    /// Record a warning and continue.
    #[default]
    Warn,
    /// Fail on the first collision.
    Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurationOutput {
    pub recipe: Recipe,
    pub examples: Vec<Example>,
    pub per_language_selected: BTreeMap<String, u64>,
    pub seed: Option<u64>,
    pub threshold: Option<f64>,
    pub generator: Option<&'static str>,
    pub warnings: Vec<Warning>,
}

impl CurationOutput {
    fn new(recipe: Recipe, source: &[Example], examples: Vec<Example>) -> Self {
        let mut per_language_selected: BTreeMap<String, u64> =
            source.iter().map(|e| (e.language.clone(), 0)).collect();
        for e in &examples {
            *per_language_selected.entry(e.language.clone()).or_insert(0) += 1;
        }
        Self {
            recipe,
            examples,
            per_language_selected,
            seed: None,
            threshold: None,
            generator: None,
            warnings: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuotaViolation {
    pub language: String,
    pub quota: u64,
    /// `None` when the language does not occur in the corpus.
    pub available: Option<u64>,
}

impl fmt::Display for QuotaViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.available {
            Some(n) => write!(
                f,
                "{}: quota {} exceeds {} available",
                self.language, self.quota, n
            ),
            None => write!(
                f,
                "{}: unknown language (quota {})",
                self.language, self.quota
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CurationError {
    Annotations(StatsError),
    InvalidTokens(&'static str),
    TokenCollision { example_id: String, token: String },
    AlreadyPrefixed { example_id: String },
    Quota(Vec<QuotaViolation>),
}

impl fmt::Display for CurationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurationError::Annotations(e) => write!(f, "{e}"),
            CurationError::InvalidTokens(msg) => f.write_str(msg),
            CurationError::TokenCollision { example_id, token } => {
                write!(
                    f,
                    "document of `{example_id}` already starts with control token `{token}`"
                )
            }
            CurationError::AlreadyPrefixed { example_id } => {
                write!(f, "document of `{example_id}` is already prefixed")
            }
            CurationError::Quota(violations) => {
                f.write_str("invalid quotas: ")?;
                for (i, v) in violations.iter().enumerate() {
                    if i > 0 {
                        f.write_str("; ")?;
                    }
                    write!(f, "{v}")?;
                }
                Ok(())
            }
        }
    }
}

impl core::error::Error for CurationError {}

impl From<StatsError> for CurationError {
    fn from(e: StatsError) -> Self {
        CurationError::Annotations(e)
    }
}

fn lookup<'a>(
    index: &BTreeMap<&str, &'a EntailmentAnnotation>,
    example: &Example,
) -> Result<&'a EntailmentAnnotation, CurationError> {
    index
        .get(example.id.as_str())
        .copied()
        .ok_or_else(|| StatsError::MissingAnnotation(example.id.clone()).into())
}

/// The source corpus unchanged.
pub fn vanilla(examples: &[Example]) -> CurationOutput {
    CurationOutput::new(Recipe::Vanilla, examples, examples.to_vec())
}

/// Keeps the examples whose score is strictly above `threshold`.
pub fn filter(
    examples: &[Example],
    annotations: &[EntailmentAnnotation],
    threshold: Threshold,
) -> Result<CurationOutput, CurationError> {
    let index = index_annotations(annotations)?;
    let mut kept = Vec::new();
    for ex in examples {
        if threshold.is_entailed(lookup(&index, ex)?.score) {
            kept.push(ex.clone());
        }
    }
    let mut out = CurationOutput::new(Recipe::Filtered, examples, kept);
    out.threshold = Some(threshold.get());
    if out.is_empty() {
        out.warnings.push(Warning::EmptySelection);
    }
    Ok(out)
}

/// Prefixes every document with the positive token when its annotation is
/// entailed and with the negative token otherwise.
pub fn augment_controlled(
    examples: &[Example],
    annotations: &[EntailmentAnnotation],
    tokens: &ControlTokens,
    policy: CollisionPolicy,
) -> Result<CurationOutput, CurationError> {
    tokens.validate()?;
    let index = index_annotations(annotations)?;
    let mut warnings = Vec::new();
    let mut out_examples = Vec::with_capacity(examples.len());
    let mut threshold = None;
    for ex in examples {
        let ann = lookup(&index, ex)?;
        threshold.get_or_insert(ann.threshold);
        if let Some(token) = [&tokens.pos, &tokens.neg]
            .into_iter()
            .find(|t| ex.document.starts_with(t.as_str()))
        {
            match policy {
                CollisionPolicy::Error => {
                    return Err(CurationError::TokenCollision {
                        example_id: ex.id.clone(),
                        token: token.clone(),
                    })
                }
                CollisionPolicy::Warn => warnings.push(Warning::TokenCollision {
                    example_id: ex.id.clone(),
                    token: token.clone(),
                }),
            }
        }
        let token = if ann.entailed {
            &tokens.pos
        } else {
            &tokens.neg
        };
        let mut e = ex.clone();
        e.document = prefix_document(token, &ex.document);
        out_examples.push(e);
    }
    let mut out = CurationOutput::new(Recipe::Controlled, examples, out_examples);
    out.threshold = threshold;
    out.warnings = warnings;
    Ok(out)
}

/// Prefixes every document with `pos_token`, ignoring annotations.
///
/// A document that already starts with `pos_token` followed by a space is
/// reported per `policy`; under `Warn` it is left as is rather than prefixed twice.
pub fn prepare_inference(
    examples: &[Example],
    pos_token: &str,
    policy: CollisionPolicy,
) -> Result<CurationOutput, CurationError> {
    if pos_token.is_empty() {
        return Err(CurationError::InvalidTokens(
            "control tokens must be non-empty",
        ));
    }
    let mut warnings = Vec::new();
    let mut out_examples = Vec::with_capacity(examples.len());
    for ex in examples {
        let mut e = ex.clone();
        let already = ex
            .document
            .strip_prefix(pos_token)
            .is_some_and(|rest| rest.starts_with(' '));
        if already {
            match policy {
                CollisionPolicy::Error => {
                    return Err(CurationError::AlreadyPrefixed {
                        example_id: ex.id.clone(),
                    })
                }
                CollisionPolicy::Warn => warnings.push(Warning::TokenCollision {
                    example_id: ex.id.clone(),
                    token: String::from(pos_token),
                }),
            }
        } else {
            e.document = prefix_document(pos_token, &ex.document);
        }
        out_examples.push(e);
    }
    let mut out = CurationOutput::new(Recipe::Inference, examples, out_examples);
    out.warnings = warnings;
    Ok(out)
}

/// Source indices grouped by language, in source order.
fn indices_by_language(examples: &[Example]) -> BTreeMap<&str, Vec<usize>> {
    let mut by_lang: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, e) in examples.iter().enumerate() {
        by_lang.entry(e.language.as_str()).or_default().push(i);
    }
    by_lang
}

fn check_quotas(
    by_lang: &BTreeMap<&str, Vec<usize>>,
    quotas: &BTreeMap<String, u64>,
) -> Result<(), CurationError> {
    let violations: Vec<QuotaViolation> = quotas
        .iter()
        .filter_map(|(language, &quota)| {
            let available = by_lang.get(language.as_str()).map(|v| v.len() as u64);
            match available {
                None if quota > 0 => Some(QuotaViolation {
                    language: language.clone(),
                    quota,
                    available: None,
                }),
                Some(n) if quota > n => Some(QuotaViolation {
                    language: language.clone(),
                    quota,
                    available: Some(n),
                }),
                _ => None,
            }
        })
        .collect();
    if violations.is_empty() {
        Ok(())
    } else {
        Err(CurationError::Quota(violations))
    }
}

fn emit_selected(examples: &[Example], mut selected: Vec<usize>) -> Vec<Example> {
    selected.sort_unstable();
    selected.into_iter().map(|i| examples[i].clone()).collect()
}

/// Seed for one language's draw: SHA-256 over a domain tag, the run seed and the language key.
pub fn language_seed(seed: u64, language: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"nlicur.random_select.v1\0");
    h.update(seed.to_le_bytes());
    h.update(language.as_bytes());
    h.finalize().into()
}

/// Uniform integer in `0..bound` by widening multiplication with rejection.
fn bounded(rng: &mut ChaCha8Rng, bound: u64) -> u64 {
    debug_assert!(bound > 0);
    let threshold = bound.wrapping_neg() % bound;
    loop {
        let m = u128::from(rng.next_u64()) * u128::from(bound);
        if (m as u64) >= threshold {
            return (m >> 64) as u64;
        }
    }
}

/// `k` distinct positions out of `0..n`, uniformly, by partial Fisher-Yates.
pub fn sample_without_replacement(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k.min(n) {
        let j = i + bounded(rng, (n - i) as u64) as usize;
        pool.swap(i, j);
    }
    pool.truncate(k.min(n));
    pool
}

/// Draws `quotas[L]` examples uniformly without replacement for every language `L`.
/// Languages absent from `quotas` contribute nothing.
pub fn random_select(
    examples: &[Example],
    quotas: &BTreeMap<String, u64>,
    seed: u64,
) -> Result<CurationOutput, CurationError> {
    let by_lang = indices_by_language(examples);
    check_quotas(&by_lang, quotas)?;
    let mut selected = Vec::new();
    for (language, idx) in &by_lang {
        let quota = quotas.get(*language).copied().unwrap_or(0) as usize;
        if quota == 0 {
            continue;
        }
        let mut rng = ChaCha8Rng::from_seed(language_seed(seed, language));
        selected.extend(
            sample_without_replacement(&mut rng, idx.len(), quota)
                .into_iter()
                .map(|p| idx[p]),
        );
    }
    let mut out = CurationOutput::new(Recipe::Random, examples, emit_selected(examples, selected));
    out.seed = Some(seed);
    out.generator = Some(SELECTION_GENERATOR);
    Ok(out)
}

/// ROUGE-L F of an example's summary against its own document.
pub fn self_rouge(example: &Example, tokenizer: &Tokenizer, beta: f64) -> f64 {
    let summary = tokenizer.tokenize(&example.summary);
    let document = tokenizer.tokenize(&example.document);
    rouge_l(&summary, &document, beta).f
}

/// Keeps, per language, the `quotas[L]` examples with the highest self-ROUGE.
/// Ties go to the smaller example id.
pub fn self_rouge_select(
    examples: &[Example],
    quotas: &BTreeMap<String, u64>,
    tokenizer: &Tokenizer,
    beta: f64,
) -> Result<CurationOutput, CurationError> {
    let scores: Vec<f64> = examples
        .iter()
        .map(|e| self_rouge(e, tokenizer, beta))
        .collect();
    self_rouge_select_scored(examples, &scores, quotas)
}

/// [`self_rouge_select`] with precomputed per-example scores (same order as `examples`).
pub fn self_rouge_select_scored(
    examples: &[Example],
    scores: &[f64],
    quotas: &BTreeMap<String, u64>,
) -> Result<CurationOutput, CurationError> {
    assert_eq!(examples.len(), scores.len(), "one score per example");
    let by_lang = indices_by_language(examples);
    check_quotas(&by_lang, quotas)?;
    let mut selected = Vec::new();
    for (language, idx) in &by_lang {
        let quota = quotas.get(*language).copied().unwrap_or(0) as usize;
        let mut ranked = idx.clone();
        ranked.sort_by(|&a, &b| {
            scores[b]
                .partial_cmp(&scores[a])
                .unwrap_or(Ordering::Equal)
                .then_with(|| examples[a].id.cmp(&examples[b].id))
        });
        selected.extend_from_slice(&ranked[..quota]);
    }
    Ok(CurationOutput::new(
        Recipe::SelfRouge,
        examples,
        emit_selected(examples, selected),
    ))
}
