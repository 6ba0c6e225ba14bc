//! Provenance record written next to every command's outputs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of the compact JSON serialization of the configuration.
    pub config_hash: String,
    /// Effective configuration after flag overrides.
    pub config: serde_json::Value,
    /// Input path as given → SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    pub tool_version: String,
    pub seed: u64,
}

impl RunManifest {
    pub fn new<C: Serialize>(command: &str, config: &C, seed: u64) -> Result<Self> {
        let config_hash = sha256_hex(serde_json::to_string(config)?.as_bytes());
        let config = serde_json::to_value(config)?;
        Ok(RunManifest {
            command: command.to_string(),
            config_hash,
            config,
            inputs: BTreeMap::new(),
            tool_version: TOOL_VERSION.to_string(),
            seed,
        })
    }

    pub fn record_input(&mut self, path: impl Into<String>, bytes: &[u8]) {
        self.inputs.insert(path.into(), sha256_hex(bytes));
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelConfig;

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn hash_tracks_config_and_round_trips() {
        let mut cfg = ModelConfig::default();
        let a = RunManifest::new("fit", &cfg, 0).unwrap();
        assert_eq!(a.config_hash, cfg.hash());
        cfg.beta = 0.0;
        let mut b = RunManifest::new("fit", &cfg, 0).unwrap();
        assert_ne!(a.config_hash, b.config_hash);
        b.record_input("data/a.csv", b"x");
        assert_eq!(RunManifest::from_json(&b.to_json().unwrap()).unwrap(), b);
    }
}
