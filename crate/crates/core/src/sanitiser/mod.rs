//! Network-dependency sanitiser.
//!
//! Network-error values report their creation to an [`EventRegistry`]. When
//! a test fails or errors, the sanitiser turns the outcome into a skip if
//!
//! * the test errored and a network error is visible in its cause chain, or
//! * a network error was created during the test's event window (used for
//!   failures, and for errors whose chain carries no network error).
//!
//! Passing and skipped tests are never touched.

mod kind;
mod matcher;
mod registry;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::model::{provenance, OutcomeState, TestOutcome};
use crate::runner::{ExecutionContext, Extension, ExtensionError};

pub use kind::NetworkErrorKind;
pub use matcher::{chain_contains_network_error, ErrorMatcher, MatcherSet, BUILT_IN_MATCHER};
pub use registry::{EventRegistry, NetworkErrorEvent};

/// Provenance label and extension name of the network sanitiser.
pub const SANITISER_NAME: &str = "network-sanitiser";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SanitiserError {
    #[error("matcher `{0}` is already registered")]
    DuplicateMatcher(String),
    #[error("matcher manifest: {0}")]
    Manifest(String),
}

/// How a network error was detected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectionPath {
    /// Found in the cause chain of an errored test.
    Chain,
    /// Found among the creation events of the test's window.
    Registry,
}

impl DetectionPath {
    pub fn as_str(self) -> &'static str {
        match self {
            DetectionPath::Chain => "chain",
            DetectionPath::Registry => "registry",
        }
    }
}

impl fmt::Display for DetectionPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DetectionPath {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "chain" => Ok(DetectionPath::Chain),
            "registry" => Ok(DetectionPath::Registry),
            _ => Err(()),
        }
    }
}

pub fn sanitiser_provenance(kind: &NetworkErrorKind, path: DetectionPath) -> String {
    provenance(SANITISER_NAME, &format!("{kind} via {path}"))
}

/// Recovers the detected kind and path from a sanitiser provenance string.
pub fn parse_provenance(text: &str) -> Option<(NetworkErrorKind, DetectionPath)> {
    let detail = text.strip_prefix(SANITISER_NAME)?.strip_prefix(": ")?;
    let (kind, path) = detail.rsplit_once(" via ")?;
    Some((kind.parse().ok()?, path.parse().ok()?))
}

/// Decides whether `raw` must become a skip.
pub fn detect(
    raw: &TestOutcome,
    ctx: &ExecutionContext,
    registry: &EventRegistry,
    matchers: &MatcherSet,
) -> Option<(NetworkErrorKind, DetectionPath)> {
    match raw.state() {
        OutcomeState::Error => matchers
            .match_chain(&ctx.cause_chain)
            .map(|k| (k, DetectionPath::Chain))
            .or_else(|| registry.first_event(ctx.context_id).map(|e| (e.kind, DetectionPath::Registry))),
        OutcomeState::Failure => registry
            .first_event(ctx.context_id)
            .map(|e| (e.kind, DetectionPath::Registry)),
        OutcomeState::Success | OutcomeState::Skipped => None,
    }
}

/// Applies the sanitising rules to one outcome.
pub fn sanitise(
    raw: &TestOutcome,
    ctx: &ExecutionContext,
    registry: &EventRegistry,
    matchers: &MatcherSet,
) -> TestOutcome {
    match detect(raw, ctx, registry, matchers) {
        Some((kind, path)) => TestOutcome::skipped(raw.message(), sanitiser_provenance(&kind, path)),
        None => raw.clone(),
    }
}

/// The sanitiser as a runner extension. It opens a fresh event window for
/// each test before its fixtures run.
#[derive(Debug, Clone)]
pub struct NetworkSanitiser {
    registry: Arc<EventRegistry>,
    matchers: Arc<MatcherSet>,
}

impl NetworkSanitiser {
    pub fn new(registry: Arc<EventRegistry>, matchers: Arc<MatcherSet>) -> Self {
        Self { registry, matchers }
    }

    pub fn registry(&self) -> &Arc<EventRegistry> {
        &self.registry
    }
}

impl Extension for NetworkSanitiser {
    fn name(&self) -> &str {
        SANITISER_NAME
    }

    fn before_test(&self, ctx: &ExecutionContext) {
        self.registry.clear_window(ctx.context_id);
    }

    fn intercept(&self, raw: &TestOutcome, ctx: &ExecutionContext) -> Result<TestOutcome, ExtensionError> {
        Ok(sanitise(raw, ctx, &self.registry, &self.matchers))
    }
}
