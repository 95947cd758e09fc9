//! The evaluation harness.
//!
//! A suite runs N times under each of four configurations (network on/off
//! crossed with sanitiser on/off). Each run gets a fresh event registry and
//! a fresh simulated network. From the resulting matrix the harness derives
//! the relevant and sanitised test sets, precision and recall, flakiness
//! per configuration and the wall-time overhead of sanitising.

pub mod corpus;
mod metrics;
mod report;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::model::{OutcomeState, Suite, TestId};
use crate::netsim::{Network, NetworkMode, NetworkState};
use crate::runner::{run_suite, Extension, RunOptions, RunRecord};
use crate::sanitiser::{EventRegistry, MatcherSet, NetworkSanitiser};

pub use metrics::{
    classify_flakiness, compute_relevant, compute_sanitised, format_ratio, measure_overhead,
    precision_recall, ratio_to_f64, wall_time_ratio, EvalSets, FlakinessReport, Overhead,
    PrecisionRecall,
};
pub use report::{emit_report, Evaluation};

pub const DEFAULT_RUNS: usize = 10;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid matrix configuration: {0}")]
    InvalidConfig(String),
    #[error("suite `{0}` has no tests")]
    EmptySuite(String),
    #[error("writing report {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("serialising report: {0}")]
    Json(#[from] serde_json::Error),
}

/// One cell of the network × sanitiser matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConfigKey {
    pub network: NetworkMode,
    pub sanitise: bool,
}

impl ConfigKey {
    pub const ALL: [ConfigKey; 4] = [
        ConfigKey::new(NetworkMode::On, false),
        ConfigKey::new(NetworkMode::On, true),
        ConfigKey::new(NetworkMode::Off, false),
        ConfigKey::new(NetworkMode::Off, true),
    ];

    pub const fn new(network: NetworkMode, sanitise: bool) -> Self {
        Self { network, sanitise }
    }

    pub fn label(self) -> String {
        format!(
            "net-{}/{}",
            self.network,
            if self.sanitise { "sanitised" } else { "unsanitised" }
        )
    }
}

impl fmt::Display for ConfigKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl Serialize for ConfigKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

#[derive(Debug, Clone)]
pub struct MatrixConfig {
    /// Runs per configuration.
    pub runs: usize,
    /// Seeds the per-run shuffling of test order.
    pub seed: u64,
    pub parallel: bool,
    pub workers: usize,
    pub context_scoping: bool,
    /// Template network; its mode is replaced per configuration.
    pub network: NetworkState,
    pub matchers: Arc<MatcherSet>,
}

impl Default for MatrixConfig {
    fn default() -> Self {
        Self {
            runs: DEFAULT_RUNS,
            seed: 0,
            parallel: false,
            workers: 1,
            context_scoping: false,
            network: NetworkState::default(),
            matchers: Arc::new(MatcherSet::with_built_in()),
        }
    }
}

/// Outcomes of every run of the matrix.
#[derive(Debug, Clone)]
pub struct MatrixReport {
    pub suite_name: String,
    pub test_ids: Vec<TestId>,
    pub runs: BTreeMap<ConfigKey, Vec<RunRecord>>,
    pub config: MatrixConfig,
}

impl MatrixReport {
    pub fn records(&self, key: ConfigKey) -> &[RunRecord] {
        self.runs.get(&key).map_or(&[], Vec::as_slice)
    }

    /// States of one test across the runs of one configuration.
    pub fn states(&self, key: ConfigKey, id: &TestId) -> Vec<OutcomeState> {
        self.records(key).iter().filter_map(|r| r.state_of(id)).collect()
    }

    pub fn is_complete(&self) -> bool {
        ConfigKey::ALL.iter().all(|k| {
            let recs = self.records(*k);
            recs.len() == self.config.runs
                && recs.iter().all(|r| self.test_ids.iter().all(|id| r.outcomes.contains_key(id)))
        })
    }
}

/// Runs one suite once under `key`, on a fresh network and registry.
pub fn run_configuration<F>(suite_factory: &F, config: &MatrixConfig, key: ConfigKey, run: usize) -> RunRecord
where
    F: Fn(&Arc<Network>) -> Suite,
{
    let registry = Arc::new(EventRegistry::new(config.context_scoping));
    let net = Arc::new(Network::new(
        Arc::clone(&registry),
        config.network.clone().with_mode(key.network),
    ));
    let suite = suite_factory(&net);
    let extensions: Vec<Arc<dyn Extension>> = if key.sanitise {
        vec![Arc::new(NetworkSanitiser::new(registry, Arc::clone(&config.matchers)))]
    } else {
        Vec::new()
    };
    let options = RunOptions {
        parallel: config.parallel,
        workers: config.workers,
        shuffle_seed: Some(config.seed.wrapping_add(run as u64)),
        config_label: key.label(),
    };
    run_suite(&suite, &extensions, &options)
}

/// Runs the full matrix, `config.runs` times per configuration.
///
/// Runs happen one after another so their timings do not interfere; run
/// `i` of every configuration uses the same test order.
pub fn run_matrix<F>(suite_factory: F, config: &MatrixConfig) -> Result<MatrixReport, EvalError>
where
    F: Fn(&Arc<Network>) -> Suite,
{
    if config.runs == 0 {
        return Err(EvalError::InvalidConfig("runs must be at least 1".into()));
    }
    if config.workers == 0 {
        return Err(EvalError::InvalidConfig("workers must be at least 1".into()));
    }
    let probe = suite_factory(&Arc::new(Network::new(
        Arc::new(EventRegistry::default()),
        config.network.clone(),
    )));
    if probe.is_empty() {
        return Err(EvalError::EmptySuite(probe.name.clone()));
    }
    let test_ids: Vec<TestId> = probe.ids().cloned().collect();

    let mut runs: BTreeMap<ConfigKey, Vec<RunRecord>> = BTreeMap::new();
    for run in 0..config.runs {
        for key in ConfigKey::ALL {
            let record = run_configuration(&suite_factory, config, key, run);
            runs.entry(key).or_default().push(record);
        }
    }
    Ok(MatrixReport {
        suite_name: probe.name,
        test_ids,
        runs,
        config: config.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{assert_that, TestSignal};

    fn small_suite(net: &Arc<Network>) -> Suite {
        let mut suite = Suite::new("small");
        suite.case("pass", || Ok(())).unwrap();
        let n = Arc::clone(net);
        suite
            .case("net", move || n.resolve("nowhere.example").map(|_| ()).map_err(TestSignal::from))
            .unwrap();
        suite.case("fail", || assert_that(false, "always")).unwrap();
        suite
    }

    #[test]
    fn matrix_shape() {
        let cfg = MatrixConfig {
            runs: 2,
            ..MatrixConfig::default()
        };
        let report = run_matrix(small_suite, &cfg).unwrap();
        assert_eq!(report.runs.len(), 4);
        assert_eq!(report.runs.values().map(Vec::len).sum::<usize>(), 8);
        for recs in report.runs.values() {
            for r in recs {
                assert_eq!(r.outcomes.len(), 3);
            }
        }
        assert!(report.is_complete());
    }

    #[test]
    fn rejects_bad_configs() {
        let cfg = MatrixConfig {
            runs: 0,
            ..MatrixConfig::default()
        };
        assert!(matches!(run_matrix(small_suite, &cfg), Err(EvalError::InvalidConfig(_))));
        let err = run_matrix(|_| Suite::new("empty"), &MatrixConfig::default()).unwrap_err();
        assert!(matches!(err, EvalError::EmptySuite(n) if n == "empty"));
    }

    #[test]
    fn labels() {
        let labels: Vec<_> = ConfigKey::ALL.iter().map(|k| k.label()).collect();
        assert_eq!(
            labels,
            ["net-on/unsanitised", "net-on/sanitised", "net-off/unsanitised", "net-off/sanitised"]
        );
    }
}
