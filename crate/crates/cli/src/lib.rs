//! Pieces shared by the `flakeguard` and `flakeguard-eval` binaries.

use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, Context, Result};
use clap::ValueEnum;
use flakeguard::eval::corpus::CorpusVariant;
use flakeguard::runner::ExtensionCatalog;
use flakeguard::sanitiser::SANITISER_NAME;
use flakeguard::{EventRegistry, MatcherSet, NetworkSanitiser, NetworkState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

impl Switch {
    pub fn enabled(self) -> bool {
        self == Switch::On
    }
}

pub fn suite_variant(name: &str) -> Result<CorpusVariant> {
    name.parse().map_err(|e: String| anyhow!(e))
}

pub fn load_network(path: Option<&Path>) -> Result<NetworkState> {
    match path {
        Some(p) => NetworkState::load(p).with_context(|| format!("loading network config {}", p.display())),
        None => Ok(NetworkState::default()),
    }
}

/// Extensions that may be named in an `extensions.manifest`.
pub fn extension_catalog(registry: &Arc<EventRegistry>, matchers: &Arc<MatcherSet>) -> ExtensionCatalog {
    let mut catalog = ExtensionCatalog::new();
    let (registry, matchers) = (Arc::clone(registry), Arc::clone(matchers));
    catalog
        .register(SANITISER_NAME, move || {
            Arc::new(NetworkSanitiser::new(Arc::clone(&registry), Arc::clone(&matchers)))
        })
        .expect("fresh catalog");
    catalog
}
