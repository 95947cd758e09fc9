//! A small unit-test runner whose extension pipeline can sanitise tests
//! that fail only because the network is unavailable, plus an in-process
//! network simulator and a harness measuring how well that works.
//!
//! * [`model`]: tests, fixtures, assertions, assumptions and outcomes.
//! * [`runner`]: suite execution and the extension chain.
//! * [`sanitiser`]: network-error events, matchers and the sanitising rules.
//! * [`netsim`]: the fault-injectable simulated network.
//! * [`eval`]: the four-configuration evaluation matrix and its metrics.

pub mod config;
pub mod context;
pub mod eval;
pub mod model;
pub mod netsim;
pub mod runner;
pub mod sanitiser;

pub use context::ContextId;
pub use model::{
    assert_that, assume_that, classify_outcome, OutcomeState, Suite, TestCase, TestId, TestOutcome,
    TestResult, TestSignal,
};
pub use netsim::{NetError, Network, NetworkMode, NetworkState};
pub use runner::{run_suite, Extension, RunOptions, RunRecord};
pub use sanitiser::{sanitise, EventRegistry, MatcherSet, NetworkErrorKind, NetworkSanitiser};
