//! Run manifests written next to every command's outputs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::config::Settings;
use crate::error::Result;
use crate::fsio;

pub const TOOL: &str = "nlicur";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Inputs and outputs are keyed by logical name, not path, so manifests
/// compare equal across working directories.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub settings_hash: String,
    pub settings: Settings,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, serde_json::Value>,
}

impl RunManifest {
    pub fn new(command: &str, settings: Settings) -> Self {
        Self {
            tool: TOOL,
            version: VERSION,
            command: command.to_string(),
            settings_hash: settings.hash(),
            settings,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            details: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, name: &str, path: &Path) -> Result<()> {
        self.inputs
            .insert(name.to_string(), fsio::file_sha256(path)?);
        Ok(())
    }

    pub fn input_bytes(&mut self, name: &str, bytes: &[u8]) {
        self.inputs
            .insert(name.to_string(), fsio::sha256_hex(bytes));
    }

    pub fn output(&mut self, name: &str, bytes: &[u8]) {
        self.outputs
            .insert(name.to_string(), fsio::sha256_hex(bytes));
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        self.details.insert(
            key.to_string(),
            serde_json::to_value(value).expect("serializable detail"),
        );
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut v = serde_json::to_vec_pretty(self).expect("manifest serializes");
        v.push(b'\n');
        v
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fsio::write_atomic(path, &self.to_json())
    }
}
