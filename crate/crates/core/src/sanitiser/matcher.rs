use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::model::ErrorDescriptor;

use super::{NetworkErrorKind, SanitiserError};

/// Name of the matcher that recognises the built-in kinds.
pub const BUILT_IN_MATCHER: &str = "built-in";

type Predicate = Arc<dyn Fn(&ErrorDescriptor) -> Option<NetworkErrorKind> + Send + Sync>;

/// Decides whether a cause-chain descriptor is a network error.
#[derive(Clone)]
pub struct ErrorMatcher {
    name: String,
    predicate: Predicate,
}

impl ErrorMatcher {
    pub fn new<F>(name: impl Into<String>, predicate: F) -> Self
    where
        F: Fn(&ErrorDescriptor) -> Option<NetworkErrorKind> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            predicate: Arc::new(predicate),
        }
    }

    /// Recognises the built-in kinds and their refinements by kind tag.
    pub fn built_in() -> Self {
        Self::new(BUILT_IN_MATCHER, |d| {
            NetworkErrorKind::BUILT_IN.into_iter().find(|k| k.matches_tag(&d.kind))
        })
    }

    /// Maps each listed tag (and its refinements) to a kind.
    pub fn from_tags(name: impl Into<String>, tags: Vec<(String, NetworkErrorKind)>) -> Self {
        Self::new(name, move |d| {
            tags.iter()
                .find(|(tag, _)| super::kind::tag_refines(&d.kind, tag))
                .map(|(_, kind)| kind.clone())
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn matches(&self, descriptor: &ErrorDescriptor) -> Option<NetworkErrorKind> {
        (self.predicate)(descriptor)
    }
}

impl fmt::Debug for ErrorMatcher {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("ErrorMatcher").field(&self.name).finish()
    }
}

/// Kind of the outermost descriptor in `chain` that any matcher recognises.
pub fn chain_contains_network_error(
    chain: &[ErrorDescriptor],
    matchers: &[ErrorMatcher],
) -> Option<NetworkErrorKind> {
    chain
        .iter()
        .find_map(|d| matchers.iter().find_map(|m| m.matches(d)))
}

/// Ordered collection of matchers with unique names.
#[derive(Debug, Clone, Default)]
pub struct MatcherSet {
    matchers: Vec<ErrorMatcher>,
}

impl MatcherSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn with_built_in() -> Self {
        Self {
            matchers: vec![ErrorMatcher::built_in()],
        }
    }

    pub fn register(&mut self, matcher: ErrorMatcher) -> Result<(), SanitiserError> {
        if self.matchers.iter().any(|m| m.name == matcher.name) {
            return Err(SanitiserError::DuplicateMatcher(matcher.name));
        }
        self.matchers.push(matcher);
        Ok(())
    }

    /// Registers the matchers described by a manifest.
    ///
    /// Each non-comment line reads `<matcher-name> <kind-tag> <kind>`; lines
    /// sharing a matcher name are combined into one matcher.
    pub fn register_manifest(&mut self, text: &str) -> Result<(), SanitiserError> {
        let mut grouped: BTreeMap<String, Vec<(String, NetworkErrorKind)>> = BTreeMap::new();
        let mut order = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<_> = line.split_whitespace().collect();
            let [name, tag, kind] = fields[..] else {
                return Err(SanitiserError::Manifest(format!(
                    "line {}: expected `<name> <kind-tag> <kind>`",
                    no + 1
                )));
            };
            let kind = kind
                .parse()
                .map_err(|e| SanitiserError::Manifest(format!("line {}: {e}", no + 1)))?;
            if !grouped.contains_key(name) {
                order.push(name.to_string());
            }
            grouped.entry(name.to_string()).or_default().push((tag.to_string(), kind));
        }
        for name in order {
            let tags = grouped.remove(&name).unwrap_or_default();
            self.register(ErrorMatcher::from_tags(name, tags))?;
        }
        Ok(())
    }

    pub fn load_manifest(&mut self, path: &Path) -> Result<(), SanitiserError> {
        let text = fs::read_to_string(path)
            .map_err(|e| SanitiserError::Manifest(format!("{}: {e}", path.display())))?;
        self.register_manifest(&text)
    }

    pub fn matchers(&self) -> &[ErrorMatcher] {
        &self.matchers
    }

    pub fn match_chain(&self, chain: &[ErrorDescriptor]) -> Option<NetworkErrorKind> {
        chain_contains_network_error(chain, &self.matchers)
    }
}
