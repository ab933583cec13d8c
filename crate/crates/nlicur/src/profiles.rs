//! Language profile tables.

use std::path::Path;

use nlicur_core::corpus::{ProfileRow, ProfileTable, TierThresholds};

use crate::csvio::CsvTable;
use crate::error::{Error, Result};

/// Bundled profiles for the 45 XL-Sum languages: training-set sizes, families
/// and XNLI membership.
pub const DEFAULT_PROFILES_CSV: &str = include_str!("../data/profiles.csv");

const COLUMNS: [&str; 5] = [
    "key",
    "display_name",
    "family",
    "xnli_member",
    "train_count",
];

fn rows(table: &CsvTable) -> Result<Vec<ProfileRow>> {
    table
        .rows()
        .map(|r| {
            Ok(ProfileRow {
                key: r.str("key")?.to_string(),
                display_name: r.str("display_name")?.to_string(),
                family: r.str("family")?.to_string(),
                xnli_member: r.bool("xnli_member")?,
                train_count: r.parse("train_count")?,
            })
        })
        .collect()
}

pub fn load_profiles(path: impl AsRef<Path>, thresholds: TierThresholds) -> Result<ProfileTable> {
    thresholds.validate()?;
    let table = CsvTable::read(path.as_ref(), &COLUMNS)?;
    let rows = rows(&table)?;
    ProfileTable::build(rows, thresholds)
        .map_err(|e| Error::validation(format!("{}: {e}", path.as_ref().display())))
}

pub fn default_profiles(thresholds: TierThresholds) -> Result<ProfileTable> {
    thresholds.validate()?;
    let table = CsvTable::from_reader(
        "<bundled profiles>",
        DEFAULT_PROFILES_CSV.as_bytes(),
        &COLUMNS,
    )?;
    Ok(ProfileTable::build(rows(&table)?, thresholds)?)
}

/// The profile file at `path`, or the bundled table when `path` is `None`.
pub fn profiles_or_default(
    path: Option<&Path>,
    thresholds: TierThresholds,
) -> Result<ProfileTable> {
    match path {
        Some(p) => load_profiles(p, thresholds),
        None => default_profiles(thresholds),
    }
}
