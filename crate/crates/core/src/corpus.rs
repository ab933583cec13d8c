//! Examples, language profiles and resource tiers.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// One article/summary pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub id: String,
    /// Normalized language key, see [`normalize_language_key`].
    pub language: String,
    pub document: String,
    pub summary: String,
    /// Fields outside the core schema as `(name, raw JSON value)`, in file order.
    /// Opaque to this crate; writers emit them back unchanged.
    pub passthrough: Vec<(String, String)>,
}

impl Example {
    pub fn new(
        id: impl Into<String>,
        language: impl AsRef<str>,
        document: impl Into<String>,
        summary: impl Into<String>,
    ) -> Self {
        Self {
            id: id.into(),
            language: normalize_language_key(language.as_ref()),
            document: document.into(),
            summary: summary.into(),
            passthrough: Vec::new(),
        }
    }

    /// Checks the per-record invariants (non-empty id, language, and trimmed texts).
    pub fn validate(&self) -> Result<(), ExampleError> {
        if self.id.is_empty() {
            return Err(ExampleError::EmptyField("id"));
        }
        if self.language.is_empty() {
            return Err(ExampleError::EmptyField("language"));
        }
        if self.document.trim().is_empty() {
            return Err(ExampleError::EmptyField("document"));
        }
        if self.summary.trim().is_empty() {
            return Err(ExampleError::EmptyField("summary"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExampleError {
    EmptyField(&'static str),
}

impl fmt::Display for ExampleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExampleError::EmptyField(name) => write!(f, "field `{name}` is empty"),
        }
    }
}

impl core::error::Error for ExampleError {}

/// Lowercases, trims, and joins internal whitespace runs with `_`.
///
/// ```
/// assert_eq!(nlicur_core::normalize_language_key(" Scottish  Gaelic "), "scottish_gaelic");
/// ```
pub fn normalize_language_key(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for (i, word) in raw.split_whitespace().enumerate() {
        if i > 0 {
            out.push('_');
        }
        for c in word.chars() {
            out.extend(c.to_lowercase());
        }
    }
    out
}

/// Per-language example counts, keyed in sorted language order.
pub fn counts_by_language<'a, I>(examples: I) -> BTreeMap<String, u64>
where
    I: IntoIterator<Item = &'a Example>,
{
    let mut counts = BTreeMap::new();
    for ex in examples {
        *counts.entry(ex.language.clone()).or_insert(0) += 1;
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ResourceTier {
    High,
    Medium,
    Low,
}

impl ResourceTier {
    pub const ALL: [ResourceTier; 3] =
        [ResourceTier::High, ResourceTier::Medium, ResourceTier::Low];

    pub fn as_str(self) -> &'static str {
        match self {
            ResourceTier::High => "high",
            ResourceTier::Medium => "medium",
            ResourceTier::Low => "low",
        }
    }
}

impl fmt::Display for ResourceTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `high` when `train_count >= high_min`, `low` when `train_count < low_max`,
/// `medium` in between.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TierThresholds {
    pub high_min: u64,
    pub low_max: u64,
}

impl Default for TierThresholds {
    fn default() -> Self {
        Self {
            high_min: 10_000,
            low_max: 6_000,
        }
    }
}

impl TierThresholds {
    pub fn new(high_min: u64, low_max: u64) -> Result<Self, ProfileError> {
        let t = Self { high_min, low_max };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        if self.high_min <= self.low_max {
            return Err(ProfileError::InconsistentThresholds {
                high_min: self.high_min,
                low_max: self.low_max,
            });
        }
        Ok(())
    }

    pub fn tier(&self, train_count: u64) -> ResourceTier {
        if train_count >= self.high_min {
            ResourceTier::High
        } else if train_count < self.low_max {
            ResourceTier::Low
        } else {
            ResourceTier::Medium
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LanguageProfile {
    pub key: String,
    pub display_name: String,
    pub family: String,
    pub xnli_member: bool,
    pub train_count: u64,
    pub resource_tier: ResourceTier,
}

/// Raw profile row before the tier is derived.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileRow {
    pub key: String,
    pub display_name: String,
    pub family: String,
    pub xnli_member: bool,
    pub train_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProfileError {
    DuplicateKey(String),
    EmptyFamily(String),
    EmptyKey,
    InconsistentThresholds { high_min: u64, low_max: u64 },
}

impl fmt::Display for ProfileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProfileError::DuplicateKey(k) => write!(f, "duplicate language key `{k}`"),
            ProfileError::EmptyFamily(k) => write!(f, "language `{k}` has an empty family"),
            ProfileError::EmptyKey => f.write_str("empty language key"),
            ProfileError::InconsistentThresholds { high_min, low_max } => write!(
                f,
                "tier thresholds need high_min > low_max (got high_min={high_min}, low_max={low_max})"
            ),
        }
    }
}

impl core::error::Error for ProfileError {}

/// Language profiles keyed by normalized language key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProfileTable {
    profiles: BTreeMap<String, LanguageProfile>,
    thresholds: TierThresholds,
}

impl ProfileTable {
    pub fn build<I>(rows: I, thresholds: TierThresholds) -> Result<Self, ProfileError>
    where
        I: IntoIterator<Item = ProfileRow>,
    {
        thresholds.validate()?;
        let mut profiles = BTreeMap::new();
        for row in rows {
            let key = normalize_language_key(&row.key);
            if key.is_empty() {
                return Err(ProfileError::EmptyKey);
            }
            let family = String::from(row.family.trim());
            if family.is_empty() {
                return Err(ProfileError::EmptyFamily(key));
            }
            if profiles.contains_key(&key) {
                return Err(ProfileError::DuplicateKey(key));
            }
            let profile = LanguageProfile {
                key: key.clone(),
                display_name: row.display_name,
                family,
                xnli_member: row.xnli_member,
                train_count: row.train_count,
                resource_tier: thresholds.tier(row.train_count),
            };
            profiles.insert(key, profile);
        }
        Ok(Self {
            profiles,
            thresholds,
        })
    }

    pub fn get(&self, key: &str) -> Option<&LanguageProfile> {
        self.profiles.get(key)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.profiles.contains_key(key)
    }

    pub fn thresholds(&self) -> TierThresholds {
        self.thresholds
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    /// Profiles in key order.
    pub fn iter(&self) -> impl Iterator<Item = &LanguageProfile> {
        self.profiles.values()
    }
}
