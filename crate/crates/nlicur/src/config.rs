//! Run configuration: a TOML file overridden by command-line flags.

use std::path::{Path, PathBuf};
use std::time::Duration;

use nlicur_core::aggregate::DEFAULT_MIN_FAMILY_SIZE;
use nlicur_core::corpus::TierThresholds;
use nlicur_core::curation::{CollisionPolicy, ControlTokens};
use nlicur_core::entailment::{OracleScorer, Scorer, Threshold};
use nlicur_core::humaneval::QualityMode;
use nlicur_core::metrics::NliMode;
use nlicur_core::selection::Weighting;
use nlicur_core::tokenize::{Tokenizer, Vocab};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsio;
use crate::remote::{RemoteConfig, RemoteScorer, DEFAULT_REMOTE_ID};

/// Environment variable that supplies the remote scorer endpoint.
pub const ENDPOINT_ENV: &str = "NLICUR_SCORER_ENDPOINT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    #[default]
    Oracle,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum TokenizerKind {
    #[default]
    Whitespace,
    Character,
    #[serde(alias = "subword")]
    #[value(alias = "subword")]
    SubwordVocab,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    #[default]
    Warn,
    Error,
}

impl From<Policy> for CollisionPolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::Warn => CollisionPolicy::Warn,
            Policy::Error => CollisionPolicy::Error,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum QualityModeArg {
    #[default]
    TopLabel,
    NormalizedMean,
}

impl From<QualityModeArg> for QualityMode {
    fn from(m: QualityModeArg) -> Self {
        match m {
            QualityModeArg::TopLabel => QualityMode::TopLabel,
            QualityModeArg::NormalizedMean => QualityMode::NormalizedMean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum NliModeArg {
    #[default]
    Binary,
    MeanScore,
}

impl From<NliModeArg> for NliMode {
    fn from(m: NliModeArg) -> Self {
        match m {
            NliModeArg::Binary => NliMode::Binary,
            NliModeArg::MeanScore => NliMode::MeanScore,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum WeightingArg {
    #[default]
    Unweighted,
    ByExamples,
}

impl From<WeightingArg> for Weighting {
    fn from(w: WeightingArg) -> Self {
        match w {
            WeightingArg::Unweighted => Weighting::Unweighted,
            WeightingArg::ByExamples => Weighting::ByExamples,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScorerSection {
    pub kind: Option<ScorerKind>,
    pub endpoint: Option<String>,
    pub id: Option<String>,
    pub batch_size: Option<usize>,
    pub max_in_flight: Option<usize>,
    pub retries: Option<u32>,
    pub initial_backoff_ms: Option<u64>,
    pub max_backoff_ms: Option<u64>,
    pub timeout_ms: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TokenizerSection {
    pub kind: Option<TokenizerKind>,
    pub vocab: Option<PathBuf>,
    pub lowercase: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurationSection {
    pub pos_token: Option<String>,
    pub neg_token: Option<String>,
    pub collision: Option<Policy>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TiersSection {
    pub high_min: Option<u64>,
    pub low_max: Option<u64>,
}

/// Paths of upstream artifacts for `report`.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportSection {
    pub annotations: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
    pub ratings: Option<PathBuf>,
}

/// The configuration file as written by the user; everything optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub corpus: Option<PathBuf>,
    pub profiles: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub threshold: Option<f64>,
    pub seed: Option<u64>,
    pub beta: Option<f64>,
    pub strict: Option<bool>,
    pub nli_mode: Option<NliModeArg>,
    pub weighting: Option<WeightingArg>,
    pub quality_mode: Option<QualityModeArg>,
    pub min_family_size: Option<usize>,
    pub scorer: ScorerSection,
    pub tokenizer: TokenizerSection,
    pub curation: CurationSection,
    pub tiers: TiersSection,
    pub report: ReportSection,
}

impl FileConfig {
    /// Parses a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fsio::read_to_string(path)?;
        let mut cfg: FileConfig =
            toml::from_str(&text).map_err(|e| Error::parse(path, 0, e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(x) = p.as_mut() {
                if x.is_relative() {
                    *x = base.join(&*x);
                }
            }
        };
        fix(&mut cfg.corpus);
        fix(&mut cfg.profiles);
        fix(&mut cfg.out);
        fix(&mut cfg.tokenizer.vocab);
        fix(&mut cfg.report.annotations);
        fix(&mut cfg.report.metrics);
        fix(&mut cfg.report.ratings);
        Ok(cfg)
    }
}

/// Flag values that override the file. `None` leaves the file value in place.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub corpus: Option<PathBuf>,
    pub profiles: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub scorer: Option<ScorerKind>,
    pub endpoint: Option<String>,
    pub threshold: Option<f64>,
    pub seed: Option<u64>,
    pub tokenizer: Option<TokenizerKind>,
    pub vocab: Option<PathBuf>,
    pub lowercase: Option<bool>,
    pub batch_size: Option<usize>,
    pub max_in_flight: Option<usize>,
    pub retries: Option<u32>,
    pub strict: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScorerConfig {
    pub kind: ScorerKind,
    pub endpoint: Option<String>,
    pub id: String,
    pub batch_size: usize,
    pub max_in_flight: usize,
    pub retries: u32,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
    pub timeout: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenizerConfig {
    pub kind: TokenizerKind,
    pub vocab: Option<PathBuf>,
    pub lowercase: bool,
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub profiles: Option<PathBuf>,
    pub out: PathBuf,
    pub threshold: Threshold,
    pub seed: u64,
    pub beta: f64,
    pub strict: bool,
    pub nli_mode: NliModeArg,
    pub weighting: WeightingArg,
    pub quality_mode: QualityModeArg,
    pub min_family_size: usize,
    pub scorer: ScorerConfig,
    pub tokenizer: TokenizerConfig,
    pub tokens: ControlTokens,
    pub collision: Policy,
    pub tiers: TierThresholds,
    pub report: ReportSection,
}

impl RunConfig {
    /// Merges file and flags; `env_endpoint` is consulted only for the remote scorer.
    pub fn resolve(
        file: FileConfig,
        flags: Overrides,
        env_endpoint: Option<String>,
    ) -> Result<Self> {
        let threshold = Threshold::new(flags.threshold.or(file.threshold).unwrap_or(0.5))
            .map_err(|e| Error::validation(e.to_string()))?;
        let kind = flags.scorer.or(file.scorer.kind).unwrap_or_default();
        let explicit_endpoint = flags.endpoint.or(file.scorer.endpoint);
        let endpoint = match kind {
            ScorerKind::Remote => match explicit_endpoint.or(env_endpoint.filter(|e| !e.is_empty())) {
                Some(e) => Some(e),
                None => {
                    return Err(Error::validation(format!(
                        "the remote scorer needs an endpoint (--endpoint, [scorer].endpoint or {ENDPOINT_ENV})"
                    )))
                }
            },
            ScorerKind::Oracle => {
                if explicit_endpoint.is_some() {
                    return Err(Error::validation("the oracle scorer does not take an endpoint"));
                }
                None
            }
        };
        let batch_size = flags.batch_size.or(file.scorer.batch_size).unwrap_or(64);
        let max_in_flight = flags
            .max_in_flight
            .or(file.scorer.max_in_flight)
            .unwrap_or(4);
        if batch_size == 0 || max_in_flight == 0 {
            return Err(Error::validation(
                "batch size and max in-flight must be at least 1",
            ));
        }
        let scorer = ScorerConfig {
            kind,
            endpoint,
            id: file.scorer.id.unwrap_or_else(|| match kind {
                ScorerKind::Oracle => OracleScorer::ID.to_string(),
                ScorerKind::Remote => DEFAULT_REMOTE_ID.to_string(),
            }),
            batch_size,
            max_in_flight,
            retries: flags.retries.or(file.scorer.retries).unwrap_or(5),
            initial_backoff: Duration::from_millis(file.scorer.initial_backoff_ms.unwrap_or(200)),
            max_backoff: Duration::from_millis(file.scorer.max_backoff_ms.unwrap_or(5_000)),
            timeout: Duration::from_millis(file.scorer.timeout_ms.unwrap_or(120_000)),
        };
        if scorer.kind == ScorerKind::Oracle && scorer.id != OracleScorer::ID {
            return Err(Error::validation(
                "[scorer].id applies to the remote scorer only",
            ));
        }

        let tokenizer = TokenizerConfig {
            kind: flags.tokenizer.or(file.tokenizer.kind).unwrap_or_default(),
            vocab: flags.vocab.or(file.tokenizer.vocab),
            lowercase: flags
                .lowercase
                .or(file.tokenizer.lowercase)
                .unwrap_or(false),
        };
        match (tokenizer.kind, &tokenizer.vocab) {
            (TokenizerKind::SubwordVocab, None) => {
                return Err(Error::validation(
                    "the subword tokenizer needs a vocabulary file (--vocab)",
                ))
            }
            (TokenizerKind::SubwordVocab, Some(_)) | (_, None) => {}
            (_, Some(_)) => {
                return Err(Error::validation(
                    "--vocab only applies to the subword tokenizer",
                ))
            }
        }

        let defaults = ControlTokens::default();
        let tokens = ControlTokens {
            pos: file.curation.pos_token.unwrap_or(defaults.pos),
            neg: file.curation.neg_token.unwrap_or(defaults.neg),
        };
        tokens.validate()?;

        let default_tiers = TierThresholds::default();
        let tiers = TierThresholds::new(
            file.tiers.high_min.unwrap_or(default_tiers.high_min),
            file.tiers.low_max.unwrap_or(default_tiers.low_max),
        )?;

        let beta = file.beta.unwrap_or(1.0);
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::validation(format!(
                "beta must be positive, got {beta}"
            )));
        }

        let cfg = RunConfig {
            corpus: flags.corpus.or(file.corpus),
            profiles: flags.profiles.or(file.profiles),
            out: flags
                .out
                .or(file.out)
                .unwrap_or_else(|| PathBuf::from("out")),
            threshold,
            seed: flags.seed.or(file.seed).unwrap_or(0),
            beta,
            strict: flags.strict.or(file.strict).unwrap_or(true),
            nli_mode: file.nli_mode.unwrap_or_default(),
            weighting: file.weighting.unwrap_or_default(),
            quality_mode: file.quality_mode.unwrap_or_default(),
            min_family_size: file.min_family_size.unwrap_or(DEFAULT_MIN_FAMILY_SIZE),
            scorer,
            tokenizer,
            tokens,
            collision: file.curation.collision.unwrap_or_default(),
            tiers,
            report: file.report,
        };
        cfg.check_paths()?;
        Ok(cfg)
    }

    /// Fails early on any configured input path that is missing.
    fn check_paths(&self) -> Result<()> {
        let inputs = [
            &self.corpus,
            &self.profiles,
            &self.tokenizer.vocab,
            &self.report.annotations,
            &self.report.metrics,
            &self.report.ratings,
        ];
        for p in inputs.into_iter().flatten() {
            require_file(p)?;
        }
        Ok(())
    }

    pub fn corpus(&self) -> Result<&Path> {
        self.corpus.as_deref().ok_or_else(|| {
            Error::validation("no corpus given (--corpus or `corpus` in the config)")
        })
    }

    pub fn tokenizer(&self) -> Result<Tokenizer> {
        let lowercase = self.tokenizer.lowercase;
        Ok(match self.tokenizer.kind {
            TokenizerKind::Whitespace => Tokenizer::Whitespace { lowercase },
            TokenizerKind::Character => Tokenizer::Character { lowercase },
            TokenizerKind::SubwordVocab => {
                let path = self.tokenizer.vocab.as_deref().expect("checked in resolve");
                Tokenizer::Subword {
                    vocab: load_vocab(path)?,
                    lowercase,
                }
            }
        })
    }

    pub fn scorer(&self) -> Box<dyn Scorer> {
        match self.scorer.kind {
            ScorerKind::Oracle => Box::new(OracleScorer),
            ScorerKind::Remote => Box::new(RemoteScorer::new(self.remote_config())),
        }
    }

    pub fn remote_config(&self) -> RemoteConfig {
        RemoteConfig {
            endpoint: self.scorer.endpoint.clone().unwrap_or_default(),
            max_retries: self.scorer.retries,
            initial_backoff: self.scorer.initial_backoff,
            max_backoff: self.scorer.max_backoff,
            timeout: self.scorer.timeout,
            scorer_id: self.scorer.id.clone(),
        }
    }

    /// Settings that can change results. Paths, endpoints and execution knobs
    /// (batch size, concurrency, retries) are left out so the hash only moves
    /// when outputs could.
    pub fn settings(&self) -> Result<Settings> {
        let vocab_sha256 = match &self.tokenizer.vocab {
            Some(p) => Some(fsio::file_sha256(p)?),
            None => None,
        };
        Ok(Settings {
            threshold: self.threshold.get(),
            seed: self.seed,
            beta: self.beta,
            strict: self.strict,
            scorer_id: self.scorer.id.clone(),
            tokenizer: self.tokenizer.kind,
            lowercase: self.tokenizer.lowercase,
            vocab_sha256,
            pos_token: self.tokens.pos.clone(),
            neg_token: self.tokens.neg.clone(),
            collision: self.collision,
            tier_high_min: self.tiers.high_min,
            tier_low_max: self.tiers.low_max,
            nli_mode: self.nli_mode,
            weighting: self.weighting,
            quality_mode: self.quality_mode,
            min_family_size: self.min_family_size,
        })
    }
}

/// Result-affecting settings, serialized into manifests.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub threshold: f64,
    pub seed: u64,
    pub beta: f64,
    pub strict: bool,
    pub scorer_id: String,
    pub tokenizer: TokenizerKind,
    pub lowercase: bool,
    pub vocab_sha256: Option<String>,
    pub pos_token: String,
    pub neg_token: String,
    pub collision: Policy,
    pub tier_high_min: u64,
    pub tier_low_max: u64,
    pub nli_mode: NliModeArg,
    pub weighting: WeightingArg,
    pub quality_mode: QualityModeArg,
    pub min_family_size: usize,
}

impl Settings {
    pub fn hash(&self) -> String {
        fsio::sha256_hex(
            serde_json::to_string(self)
                .expect("settings serialize")
                .as_bytes(),
        )
    }
}

pub fn require_file(path: &Path) -> Result<()> {
    match std::fs::metadata(path) {
        Ok(m) if m.is_file() => Ok(()),
        Ok(_) => Err(Error::validation(format!(
            "{} is not a file",
            path.display()
        ))),
        Err(e) => Err(Error::io(path, e)),
    }
}

/// One piece per line; anything after a tab (a score) is ignored.
pub fn load_vocab(path: &Path) -> Result<Vocab> {
    let text = fsio::read_to_string(path)?;
    let pieces: Vec<&str> = text
        .lines()
        .map(|l| l.split('\t').next().unwrap_or(""))
        .filter(|p| !p.is_empty())
        .collect();
    if pieces.is_empty() {
        return Err(Error::validation(format!(
            "{}: vocabulary is empty",
            path.display()
        )));
    }
    Ok(Vocab::new(pieces))
}
