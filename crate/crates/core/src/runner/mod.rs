//! Suite execution with fixtures and an interceptor chain of extensions.

mod autodetect;

use std::collections::BTreeMap;
use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::time::Instant;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::ContextId;
use crate::model::{
    classify_outcome, invoke, provenance, Action, ErrorDescriptor, FixtureSet, OutcomeState,
    SignalKind, Suite, TestCase, TestClass, TestId, TestOutcome, TestResult, TestSignal,
    DISABLED_PROVENANCE,
};

pub use autodetect::{
    autodetect_enabled, autodetect_extensions, load_manifest, parse_manifest, ExtensionCatalog,
    AUTODETECT_ENV, MANIFEST_FILE,
};

/// Provenance label for tests skipped because a before-all fixture failed.
pub const BEFORE_ALL_PROVENANCE: &str = "before-all";

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("extension `{0}` is already registered")]
    DuplicateExtension(String),
    #[error("unknown extension `{0}`")]
    UnknownExtension(String),
    #[error("reading extension manifest {path}: {source}")]
    Manifest {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Error an extension may report instead of an outcome. The runner treats
/// it as "no change".
#[derive(Debug, Error)]
#[error("{0}")]
pub struct ExtensionError(pub String);

/// What the runner knows about the test currently being executed.
#[derive(Debug, Clone)]
pub struct ExecutionContext {
    pub test_id: TestId,
    pub context_id: ContextId,
    /// Cause chain of the raw result; empty unless the raw state is Error.
    pub cause_chain: Vec<ErrorDescriptor>,
    pub started: Instant,
    pub finished: Option<Instant>,
}

impl ExecutionContext {
    pub fn new(test_id: TestId, context_id: ContextId) -> Self {
        Self {
            test_id,
            context_id,
            cause_chain: Vec::new(),
            started: Instant::now(),
            finished: None,
        }
    }

    pub fn with_cause_chain(mut self, chain: Vec<ErrorDescriptor>) -> Self {
        self.cause_chain = chain;
        self
    }
}

/// A hook into the test pipeline.
///
/// Extensions are only consulted for failing (Failure or Error) tests. They
/// must be safe to call concurrently for distinct contexts.
pub trait Extension: Send + Sync {
    fn name(&self) -> &str;

    /// Called before the per-test fixtures of each test run.
    fn before_test(&self, _ctx: &ExecutionContext) {}

    /// Inspects a raw failing outcome. Returning a Skipped outcome ends the
    /// chain; anything else leaves the outcome to later extensions.
    fn intercept(
        &self,
        raw: &TestOutcome,
        ctx: &ExecutionContext,
    ) -> Result<TestOutcome, ExtensionError>;
}

impl fmt::Debug for dyn Extension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Extension({})", self.name())
    }
}

/// Outcomes of one suite run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub suite_name: String,
    pub config_label: String,
    pub outcomes: BTreeMap<TestId, TestOutcome>,
    /// Seconds.
    pub wall_time: f64,
    /// Suite-level problems that do not change any test outcome, such as a
    /// failing after-all fixture.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl RunRecord {
    pub fn state_of(&self, id: &TestId) -> Option<OutcomeState> {
        self.outcomes.get(id).map(TestOutcome::state)
    }

    pub fn count(&self, state: OutcomeState) -> usize {
        self.outcomes.values().filter(|o| o.state() == state).count()
    }

    /// A build passes when no test failed or errored.
    pub fn build_passed(&self) -> bool {
        self.outcomes.values().all(|o| !o.state().is_failing())
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub parallel: bool,
    pub workers: usize,
    /// Shuffles the execution order within each test class.
    pub shuffle_seed: Option<u64>,
    pub config_label: String,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            parallel: false,
            workers: 1,
            shuffle_seed: None,
            config_label: String::from("default"),
        }
    }
}

impl RunOptions {
    pub fn sequential() -> Self {
        Self::default()
    }

    pub fn parallel(workers: usize) -> Self {
        Self {
            parallel: true,
            workers,
            ..Self::default()
        }
    }

    pub fn label(mut self, label: impl Into<String>) -> Self {
        self.config_label = label.into();
        self
    }

    pub fn shuffled(mut self, seed: u64) -> Self {
        self.shuffle_seed = Some(seed);
        self
    }
}

/// Applies the extension chain to a raw outcome.
///
/// Passing and skipped outcomes are returned untouched. For failing ones the
/// first extension that answers with a Skipped outcome wins.
pub fn chain_intercept(
    extensions: &[Arc<dyn Extension>],
    raw: TestOutcome,
    ctx: &ExecutionContext,
) -> TestOutcome {
    if !raw.state().is_failing() {
        return raw;
    }
    for ext in extensions {
        match catch_unwind(AssertUnwindSafe(|| ext.intercept(&raw, ctx))) {
            Ok(Ok(outcome)) if outcome.state() == OutcomeState::Skipped => return outcome,
            Ok(Ok(_)) => {}
            Ok(Err(e)) => warn!("extension {} failed on {}: {e}", ext.name(), ctx.test_id),
            Err(_) => warn!("extension {} panicked on {}", ext.name(), ctx.test_id),
        }
    }
    raw
}

/// Runs before-each fixtures, the body and after-each fixtures of one test
/// inside `ctx` and classifies the result. No extensions are involved.
pub fn execute(case: &TestCase, suite_fixtures: &FixtureSet, ctx: &mut ExecutionContext) -> TestOutcome {
    let _guard = ctx.context_id.enter();
    ctx.started = Instant::now();
    ctx.cause_chain.clear();

    if case.disabled {
        ctx.finished = Some(Instant::now());
        return TestOutcome::skipped(
            "test is disabled",
            provenance(DISABLED_PROVENANCE, "statically disabled"),
        );
    }

    let class = case.class_fixtures();
    let befores = [suite_fixtures.before_each.as_ref(), class.and_then(|f| f.before_each.as_ref())];
    let afters = [class.and_then(|f| f.after_each.as_ref()), suite_fixtures.after_each.as_ref()];

    let mut result: TestResult = Ok(());
    for before in befores.into_iter().flatten() {
        result = invoke(before);
        if result.is_err() {
            break;
        }
    }
    if result.is_ok() {
        result = invoke(&case.body);
    }
    for after in afters.into_iter().flatten() {
        let r = invoke(after);
        if result.is_ok() {
            result = r;
        }
    }

    if let Err(signal) = &result {
        if signal.kind() == SignalKind::UnhandledError {
            ctx.cause_chain = signal.cause_chain().to_vec();
        }
    }
    ctx.finished = Some(Instant::now());
    classify_outcome(&result)
}

/// Runs one test with its per-test fixtures and passes the result through
/// the extension chain.
pub fn run_test(
    case: &TestCase,
    suite_fixtures: &FixtureSet,
    extensions: &[Arc<dyn Extension>],
    ctx: &mut ExecutionContext,
) -> TestOutcome {
    for ext in extensions {
        if catch_unwind(AssertUnwindSafe(|| ext.before_test(ctx))).is_err() {
            warn!("extension {} panicked before {}", ext.name(), ctx.test_id);
        }
    }
    let raw = execute(case, suite_fixtures, ctx);
    chain_intercept(extensions, raw, ctx)
}

// Runs a suite- or class-level fixture in a context of its own so that no
// test window ever sees what it does.
fn run_scope_fixture(fixture: Option<&Action>) -> TestResult {
    match fixture {
        Some(a) => {
            let _guard = ContextId::fresh().enter();
            invoke(a)
        }
        None => Ok(()),
    }
}

fn before_all_skip(scope: &str, err: &TestSignal) -> TestOutcome {
    TestOutcome::skipped(
        err.message().to_string(),
        provenance(BEFORE_ALL_PROVENANCE, &format!("failed in {scope} ({})", err.message())),
    )
}

/// Runs every case of `suite` and returns one outcome per case.
pub fn run_suite(suite: &Suite, extensions: &[Arc<dyn Extension>], options: &RunOptions) -> RunRecord {
    let start = Instant::now();
    let mut outcomes = BTreeMap::new();
    let mut warnings = Vec::new();

    if let Err(err) = run_scope_fixture(suite.fixtures.before_all.as_ref()) {
        for case in suite.cases() {
            outcomes.insert(case.id.clone(), before_all_skip(&suite.name, &err));
        }
    } else {
        let mut rng = options.shuffle_seed.map(ChaCha8Rng::seed_from_u64);
        for (class, mut cases) in group_by_class(suite) {
            let scope = class.map_or(suite.name.as_str(), |c| c.name.as_str());
            let class_fixtures = class.map(|c| &c.fixtures);
            if let Err(err) = run_scope_fixture(class_fixtures.and_then(|f| f.before_all.as_ref())) {
                for case in cases {
                    outcomes.insert(case.id.clone(), before_all_skip(scope, &err));
                }
                continue;
            }
            if let Some(rng) = rng.as_mut() {
                cases.shuffle(rng);
            }
            for (id, outcome) in run_cases(&cases, &suite.fixtures, extensions, options) {
                outcomes.insert(id, outcome);
            }
            if let Err(err) = run_scope_fixture(class_fixtures.and_then(|f| f.after_all.as_ref())) {
                warnings.push(format!("after-all failed in {scope}: {}", err.message()));
            }
        }
    }

    if let Err(err) = run_scope_fixture(suite.fixtures.after_all.as_ref()) {
        warnings.push(format!("after-all failed in {}: {}", suite.name, err.message()));
    }
    for w in &warnings {
        warn!("{w}");
    }

    RunRecord {
        suite_name: suite.name.clone(),
        config_label: options.config_label.clone(),
        outcomes,
        wall_time: start.elapsed().as_secs_f64(),
        warnings,
    }
}

// Groups cases by owning class, in order of first appearance.
fn group_by_class(suite: &Suite) -> Vec<(Option<&TestClass>, Vec<&TestCase>)> {
    let mut groups: Vec<(Option<&TestClass>, Vec<&TestCase>)> = Vec::new();
    for case in suite.cases() {
        let class = case.class.as_deref();
        let pos = groups.iter().position(|(c, _)| match (c, class) {
            (None, None) => true,
            (Some(a), Some(b)) => std::ptr::eq(*a, b),
            _ => false,
        });
        match pos {
            Some(i) => groups[i].1.push(case),
            None => groups.push((class, vec![case])),
        }
    }
    groups
}

fn run_cases(
    cases: &[&TestCase],
    suite_fixtures: &FixtureSet,
    extensions: &[Arc<dyn Extension>],
    options: &RunOptions,
) -> Vec<(TestId, TestOutcome)> {
    let workers = options.workers.max(1).min(cases.len().max(1));
    if !options.parallel || workers == 1 {
        let slot = ContextId::fresh();
        return cases
            .iter()
            .map(|case| {
                let mut ctx = ExecutionContext::new(case.id.clone(), slot);
                (case.id.clone(), run_test(case, suite_fixtures, extensions, &mut ctx))
            })
            .collect();
    }

    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            scope.spawn(move || {
                let slot = ContextId::fresh();
                loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(case) = cases.get(i) else { break };
                    let mut ctx = ExecutionContext::new(case.id.clone(), slot);
                    let outcome = run_test(case, suite_fixtures, extensions, &mut ctx);
                    if tx.send((case.id.clone(), outcome)).is_err() {
                        break;
                    }
                }
            });
        }
    });
    drop(tx);
    rx.into_iter().collect()
}
