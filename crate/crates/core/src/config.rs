//! Sanitiser configuration from the environment or a `key=value` file.
//!
//! | key                          | values    | default |
//! |------------------------------|-----------|---------|
//! | `FLAKEGUARD_SANITISE`        | `on`/`off`| `off`   |
//! | `FLAKEGUARD_CONTEXT_SCOPING` | `on`/`off`| `off`   |
//! | `FLAKEGUARD_MATCHERS`        | path      | none    |

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::sanitiser::{MatcherSet, SanitiserError};

pub const SANITISE_KEY: &str = "FLAKEGUARD_SANITISE";
pub const CONTEXT_SCOPING_KEY: &str = "FLAKEGUARD_CONTEXT_SCOPING";
pub const MATCHERS_KEY: &str = "FLAKEGUARD_MATCHERS";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{key}: expected on or off, got `{value}`")]
    InvalidSwitch { key: String, value: String },
    #[error("config file {0}: {1}")]
    File(String, String),
    #[error(transparent)]
    Matchers(#[from] SanitiserError),
}

/// Parses `on`/`off` (also `true`/`false`, `1`/`0`).
pub fn parse_switch(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value.trim().to_ascii_lowercase().as_str() {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        _ => Err(ConfigError::InvalidSwitch {
            key: key.to_string(),
            value: value.to_string(),
        }),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SanitiserConfig {
    pub sanitise: bool,
    pub context_scoping: bool,
    pub matchers: Option<PathBuf>,
}

impl SanitiserConfig {
    pub fn from_lookup<F>(lookup: F) -> Result<Self, ConfigError>
    where
        F: Fn(&str) -> Option<String>,
    {
        let mut cfg = Self::default();
        if let Some(v) = lookup(SANITISE_KEY) {
            cfg.sanitise = parse_switch(SANITISE_KEY, &v)?;
        }
        if let Some(v) = lookup(CONTEXT_SCOPING_KEY) {
            cfg.context_scoping = parse_switch(CONTEXT_SCOPING_KEY, &v)?;
        }
        cfg.matchers = lookup(MATCHERS_KEY).filter(|v| !v.trim().is_empty()).map(PathBuf::from);
        Ok(cfg)
    }

    pub fn from_env() -> Result<Self, ConfigError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    /// Reads the same keys from a `KEY=value` file.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ConfigError::File(path.display().to_string(), e.to_string()))?;
        let pairs: Vec<(String, String)> = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
            .collect();
        Self::from_lookup(|k| pairs.iter().rev().find(|(key, _)| key == k).map(|(_, v)| v.clone()))
    }

    /// Built-in matchers plus those of the configured manifest.
    pub fn matcher_set(&self) -> Result<Arc<MatcherSet>, ConfigError> {
        let mut set = MatcherSet::with_built_in();
        if let Some(path) = &self.matchers {
            set.load_manifest(path)?;
        }
        Ok(Arc::new(set))
    }
}
