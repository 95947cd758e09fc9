//! Tests, fixtures, assumptions, assertions and the four-valued outcome model.

use std::any::Any;
use std::collections::HashSet;
use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Provenance label used for skips caused by a violated assumption.
pub const ASSUMPTION_PROVENANCE: &str = "assumption";
/// Provenance label used for statically disabled tests.
pub const DISABLED_PROVENANCE: &str = "disabled";
/// Kind tag given to panics raised by test code.
pub const PANIC_KIND: &str = "panic";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("duplicate test id `{0}`")]
    DuplicateTestId(TestId),
}

/// The state a test run ends in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OutcomeState {
    Success,
    Failure,
    Error,
    Skipped,
}

impl OutcomeState {
    pub const ALL: [OutcomeState; 4] = [
        OutcomeState::Success,
        OutcomeState::Failure,
        OutcomeState::Error,
        OutcomeState::Skipped,
    ];

    /// Failure or Error, the states that break a build.
    pub fn is_failing(self) -> bool {
        matches!(self, OutcomeState::Failure | OutcomeState::Error)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeState::Success => "success",
            OutcomeState::Failure => "failure",
            OutcomeState::Error => "error",
            OutcomeState::Skipped => "skipped",
        }
    }
}

impl fmt::Display for OutcomeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Result of a single test execution.
///
/// A skipped outcome always carries a non-empty provenance of the form
/// `<source>: <detail>` naming what caused the skip.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestOutcome {
    state: OutcomeState,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    provenance: Option<String>,
}

impl TestOutcome {
    pub fn success() -> Self {
        Self {
            state: OutcomeState::Success,
            message: String::new(),
            provenance: None,
        }
    }

    pub fn failure(message: impl Into<String>) -> Self {
        Self {
            state: OutcomeState::Failure,
            message: message.into(),
            provenance: None,
        }
    }

    pub fn error(message: impl Into<String>) -> Self {
        Self {
            state: OutcomeState::Error,
            message: message.into(),
            provenance: None,
        }
    }

    /// Panics if `provenance` is empty.
    pub fn skipped(message: impl Into<String>, provenance: impl Into<String>) -> Self {
        let provenance = provenance.into();
        assert!(!provenance.is_empty(), "skipped outcome requires a provenance");
        Self {
            state: OutcomeState::Skipped,
            message: message.into(),
            provenance: Some(provenance),
        }
    }

    pub fn state(&self) -> OutcomeState {
        self.state
    }

    pub fn message(&self) -> &str {
        &self.message
    }

    pub fn provenance(&self) -> Option<&str> {
        self.provenance.as_deref()
    }
}

/// Formats a provenance string as `<source>: <detail>`.
pub fn provenance(source: &str, detail: &str) -> String {
    format!("{source}: {detail}")
}

/// One link of a cause chain: a machine-readable kind tag plus a message.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ErrorDescriptor {
    pub kind: String,
    pub message: String,
}

impl ErrorDescriptor {
    pub fn new(kind: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ErrorDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.message.is_empty() {
            f.write_str(&self.kind)
        } else {
            write!(f, "{}: {}", self.kind, self.message)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SignalKind {
    AssertionViolation,
    AssumptionViolation,
    UnhandledError,
}

/// Signal raised out of a test body or fixture.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestSignal {
    kind: SignalKind,
    message: String,
    cause_chain: Vec<ErrorDescriptor>,
}

impl TestSignal {
    pub fn assertion(message: impl Into<String>) -> Self {
        Self {
            kind: SignalKind::AssertionViolation,
            message: message.into(),
            cause_chain: Vec::new(),
        }
    }

    pub fn assumption(message: impl Into<String>) -> Self {
        Self {
            kind: SignalKind::AssumptionViolation,
            message: message.into(),
            cause_chain: Vec::new(),
        }
    }

    /// An unhandled error with the given cause chain, outermost first.
    ///
    /// An empty chain is replaced by a single `unknown` descriptor so the
    /// chain of an unhandled error is never empty.
    pub fn unhandled(mut cause_chain: Vec<ErrorDescriptor>) -> Self {
        if cause_chain.is_empty() {
            cause_chain.push(ErrorDescriptor::new("unknown", "unhandled error"));
        }
        Self {
            kind: SignalKind::UnhandledError,
            message: cause_chain[0].to_string(),
            cause_chain,
        }
    }

    pub fn error(kind: impl Into<String>, message: impl Into<String>) -> Self {
        Self::unhandled(vec![ErrorDescriptor::new(kind, message)])
    }

    /// Wraps this signal in an outer error, the way a library rethrows a
    /// lower-level failure as its own error type.
    pub fn wrap(self, kind: impl Into<String>, message: impl Into<String>) -> Self {
        let mut chain = vec![ErrorDescriptor::new(kind, message)];
        match self.kind {
            SignalKind::UnhandledError => chain.extend(self.cause_chain),
            SignalKind::AssertionViolation => {
                chain.push(ErrorDescriptor::new("AssertionViolation", self.message))
            }
            SignalKind::AssumptionViolation => {
                chain.push(ErrorDescriptor::new("AssumptionViolation", self.message))
            }
        }
        Self::unhandled(chain)
    }

    pub fn kind(&self) -> SignalKind {
        self.kind
    }

    pub fn message(&self) -> &str {
        &self.message
    }

    pub fn cause_chain(&self) -> &[ErrorDescriptor] {
        &self.cause_chain
    }
}

impl fmt::Display for TestSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.message)
    }
}

/// What a test body, fixture or whole per-test execution produced.
pub type TestResult = Result<(), TestSignal>;

pub fn assert_that(condition: bool, message: impl Into<String>) -> TestResult {
    if condition {
        Ok(())
    } else {
        Err(TestSignal::assertion(message))
    }
}

pub fn assume_that(condition: bool, message: impl Into<String>) -> TestResult {
    if condition {
        Ok(())
    } else {
        Err(TestSignal::assumption(message))
    }
}

/// Maps an execution result onto its outcome state.
pub fn classify_outcome(result: &TestResult) -> TestOutcome {
    match result {
        Ok(()) => TestOutcome::success(),
        Err(signal) => match signal.kind {
            SignalKind::AssumptionViolation => TestOutcome::skipped(
                signal.message.clone(),
                provenance(ASSUMPTION_PROVENANCE, &signal.message),
            ),
            SignalKind::AssertionViolation => TestOutcome::failure(signal.message.clone()),
            SignalKind::UnhandledError => TestOutcome::error(signal.message.clone()),
        },
    }
}

/// Executable test body or fixture.
pub type Action = Arc<dyn Fn() -> TestResult + Send + Sync>;

pub fn action<F>(f: F) -> Action
where
    F: Fn() -> TestResult + Send + Sync + 'static,
{
    Arc::new(f)
}

/// Runs an action, turning a panic into an unhandled error.
pub fn invoke(action: &Action) -> TestResult {
    match catch_unwind(AssertUnwindSafe(|| action())) {
        Ok(result) => result,
        Err(payload) => Err(TestSignal::error(PANIC_KIND, panic_message(&*payload))),
    }
}

fn panic_message(payload: &(dyn Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "non-string panic payload".to_string()
    }
}

#[derive(Clone, Default)]
pub struct FixtureSet {
    pub before_each: Option<Action>,
    pub after_each: Option<Action>,
    pub before_all: Option<Action>,
    pub after_all: Option<Action>,
}

impl FixtureSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn before_each(mut self, a: Action) -> Self {
        self.before_each = Some(a);
        self
    }

    pub fn after_each(mut self, a: Action) -> Self {
        self.after_each = Some(a);
        self
    }

    pub fn before_all(mut self, a: Action) -> Self {
        self.before_all = Some(a);
        self
    }

    pub fn after_all(mut self, a: Action) -> Self {
        self.after_all = Some(a);
        self
    }
}

impl fmt::Debug for FixtureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FixtureSet")
            .field("before_each", &self.before_each.is_some())
            .field("after_each", &self.after_each.is_some())
            .field("before_all", &self.before_all.is_some())
            .field("after_all", &self.after_all.is_some())
            .finish()
    }
}

/// A group of tests sharing per-class fixtures.
#[derive(Debug)]
pub struct TestClass {
    pub name: String,
    pub fixtures: FixtureSet,
}

impl TestClass {
    pub fn new(name: impl Into<String>, fixtures: FixtureSet) -> Arc<Self> {
        Arc::new(Self {
            name: name.into(),
            fixtures,
        })
    }
}

/// `<suite>::<case>` test identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TestId(String);

impl TestId {
    pub fn new(suite: &str, case: &str) -> Self {
        Self(format!("{suite}::{case}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The case part of the identifier.
    pub fn case_name(&self) -> &str {
        self.0.split_once("::").map_or(&self.0, |(_, case)| case)
    }
}

impl fmt::Display for TestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone)]
pub struct TestCase {
    pub id: TestId,
    pub body: Action,
    /// Statically disabled: the body and its fixtures never run.
    pub disabled: bool,
    pub class: Option<Arc<TestClass>>,
}

impl TestCase {
    pub fn new(suite: &str, name: &str, body: Action) -> Self {
        Self {
            id: TestId::new(suite, name),
            body,
            disabled: false,
            class: None,
        }
    }

    pub fn disabled(mut self) -> Self {
        self.disabled = true;
        self
    }

    pub fn in_class(mut self, class: &Arc<TestClass>) -> Self {
        self.class = Some(Arc::clone(class));
        self
    }

    pub fn class_fixtures(&self) -> Option<&FixtureSet> {
        self.class.as_ref().map(|c| &c.fixtures)
    }
}

impl fmt::Debug for TestCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestCase")
            .field("id", &self.id)
            .field("disabled", &self.disabled)
            .field("class", &self.class.as_ref().map(|c| &c.name))
            .finish()
    }
}

/// An ordered set of tests plus suite-wide fixtures.
#[derive(Debug, Clone)]
pub struct Suite {
    pub name: String,
    cases: Vec<TestCase>,
    pub fixtures: FixtureSet,
    ids: HashSet<TestId>,
}

impl Suite {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            cases: Vec::new(),
            fixtures: FixtureSet::default(),
            ids: HashSet::new(),
        }
    }

    pub fn with_fixtures(mut self, fixtures: FixtureSet) -> Self {
        self.fixtures = fixtures;
        self
    }

    pub fn add(&mut self, case: TestCase) -> Result<(), ModelError> {
        if !self.ids.insert(case.id.clone()) {
            return Err(ModelError::DuplicateTestId(case.id));
        }
        self.cases.push(case);
        Ok(())
    }

    /// Adds a case named `name` in this suite.
    pub fn case<F>(&mut self, name: &str, body: F) -> Result<&mut TestCase, ModelError>
    where
        F: Fn() -> TestResult + Send + Sync + 'static,
    {
        self.add(TestCase::new(&self.name, name, action(body)))?;
        Ok(self.cases.last_mut().expect("just pushed"))
    }

    pub fn cases(&self) -> &[TestCase] {
        &self.cases
    }

    pub fn ids(&self) -> impl Iterator<Item = &TestId> {
        self.cases.iter().map(|c| &c.id)
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Calculator;

    impl Calculator {
        fn add(&self, a: i32, b: i32) -> i32 {
            a + b
        }
    }

    #[test]
    fn assertions() {
        assert_eq!(assert_that(true, "ok"), Ok(()));
        let err = assert_that(false, "divide broken").unwrap_err();
        assert_eq!(err.kind(), SignalKind::AssertionViolation);
        assert_eq!(err.message(), "divide broken");
        assert_eq!(assert_that(4 == Calculator.add(1, 3), ""), Ok(()));
    }

    #[test]
    fn assumptions() {
        assert_eq!(assume_that(true, "net up"), Ok(()));
        let err = assume_that(false, "service unreachable").unwrap_err();
        assert_eq!(err.kind(), SignalKind::AssumptionViolation);
        assert_eq!(err.message(), "service unreachable");

        let headless = true;
        let err = assume_that(!headless, "requires a display").unwrap_err();
        assert_eq!(err.kind(), SignalKind::AssumptionViolation);
    }

    #[test]
    fn classification_follows_the_four_states() {
        assert_eq!(classify_outcome(&Ok(())).state(), OutcomeState::Success);

        let skipped = classify_outcome(&Err(TestSignal::assumption("x")));
        assert_eq!(skipped.state(), OutcomeState::Skipped);
        assert_eq!(skipped.message(), "x");
        assert_eq!(skipped.provenance(), Some("assumption: x"));

        let divide = TestSignal::unhandled(vec![ErrorDescriptor::new(
            "ArithmeticError",
            "divide by zero",
        )]);
        assert_eq!(classify_outcome(&Err(divide)).state(), OutcomeState::Error);

        let failed = classify_outcome(&Err(TestSignal::assertion("y")));
        assert_eq!(failed.state(), OutcomeState::Failure);
        assert_eq!(failed.message(), "y");
        assert_eq!(failed.provenance(), None);
    }

    #[test]
    fn unhandled_chain_is_never_empty() {
        let s = TestSignal::unhandled(Vec::new());
        assert_eq!(s.cause_chain().len(), 1);
        assert!(!s.cause_chain()[0].kind.is_empty());
    }

    #[test]
    fn wrap_puts_outer_error_first() {
        let inner = TestSignal::error("UnknownHost", "help.example");
        let outer = inner.wrap("ParseError", "could not load schema");
        let kinds: Vec<_> = outer.cause_chain().iter().map(|d| d.kind.as_str()).collect();
        assert_eq!(kinds, ["ParseError", "UnknownHost"]);
        assert_eq!(outer.message(), "ParseError: could not load schema");
    }

    #[test]
    fn panics_become_errors() {
        let body = action(|| {
            let v: Vec<i32> = Vec::new();
            assert_that(v[3] == 0, "")
        });
        let err = invoke(&body).unwrap_err();
        assert_eq!(err.kind(), SignalKind::UnhandledError);
        assert_eq!(err.cause_chain()[0].kind, PANIC_KIND);
    }

    #[test]
    #[should_panic(expected = "provenance")]
    fn skip_without_provenance_is_rejected() {
        TestOutcome::skipped("x", "");
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let mut suite = Suite::new("s");
        suite.case("a", || Ok(())).unwrap();
        let err = suite.case("a", || Ok(())).unwrap_err();
        assert_eq!(err, ModelError::DuplicateTestId(TestId::new("s", "a")));
        assert_eq!(suite.len(), 1);
    }

    #[test]
    fn test_id_format() {
        let id = TestId::new("net", "fetch-help");
        assert_eq!(id.as_str(), "net::fetch-help");
        assert_eq!(id.case_name(), "fetch-help");
    }
}
