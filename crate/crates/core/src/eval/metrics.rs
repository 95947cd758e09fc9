use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::Ratio;
use serde::Serialize;

use crate::model::{OutcomeState, TestId};
use crate::netsim::NetworkMode;
use crate::runner::RunRecord;

use super::{ConfigKey, MatrixReport};

/// Tests whose outcome changed between runs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FlakinessReport {
    /// Passed in some run and failed or errored in another.
    pub flaky: BTreeSet<TestId>,
    /// Ended in at least two different states.
    pub weakly_flaky: BTreeSet<TestId>,
}

/// Classifies tests over a series of runs of one configuration.
pub fn classify_flakiness(records: &[RunRecord]) -> FlakinessReport {
    let mut states: BTreeMap<&TestId, BTreeSet<OutcomeState>> = BTreeMap::new();
    for rec in records {
        for (id, out) in &rec.outcomes {
            states.entry(id).or_default().insert(out.state());
        }
    }
    let mut report = FlakinessReport::default();
    for (id, seen) in states {
        if seen.len() >= 2 {
            report.weakly_flaky.insert(id.clone());
        }
        if seen.contains(&OutcomeState::Success) && seen.iter().any(|s| s.is_failing()) {
            report.flaky.insert(id.clone());
        }
    }
    report
}

fn all_runs(report: &MatrixReport, key: ConfigKey, id: &TestId, pred: impl Fn(OutcomeState) -> bool) -> bool {
    let records = report.records(key);
    !records.is_empty() && records.iter().all(|r| r.state_of(id).is_some_and(&pred))
}

/// Tests that always pass with the network on and always fail or error with
/// it off, both without sanitisation.
pub fn compute_relevant(report: &MatrixReport) -> BTreeSet<TestId> {
    report
        .test_ids
        .iter()
        .filter(|id| {
            all_runs(report, ConfigKey::new(NetworkMode::On, false), id, |s| s == OutcomeState::Success)
                && all_runs(report, ConfigKey::new(NetworkMode::Off, false), id, OutcomeState::is_failing)
        })
        .cloned()
        .collect()
}

/// Tests that always fail or error with the network off and no sanitiser,
/// and are always skipped with the network off and the sanitiser on.
pub fn compute_sanitised(report: &MatrixReport) -> BTreeSet<TestId> {
    report
        .test_ids
        .iter()
        .filter(|id| {
            all_runs(report, ConfigKey::new(NetworkMode::Off, false), id, OutcomeState::is_failing)
                && all_runs(report, ConfigKey::new(NetworkMode::Off, true), id, |s| s == OutcomeState::Skipped)
        })
        .cloned()
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct EvalSets {
    /// Tests that genuinely depend on the network.
    pub relevant: BTreeSet<TestId>,
    /// Tests the sanitiser turned into skips.
    pub sanitised: BTreeSet<TestId>,
}

impl EvalSets {
    pub fn from_report(report: &MatrixReport) -> Self {
        Self {
            relevant: compute_relevant(report),
            sanitised: compute_sanitised(report),
        }
    }

    pub fn intersection(&self) -> BTreeSet<TestId> {
        self.relevant.intersection(&self.sanitised).cloned().collect()
    }
}

/// Exact precision and recall; `None` when the denominator set is empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrecisionRecall {
    pub precision: Option<Ratio<u64>>,
    pub recall: Option<Ratio<u64>>,
}

pub fn precision_recall(sets: &EvalSets) -> PrecisionRecall {
    let hits = sets.relevant.intersection(&sets.sanitised).count() as u64;
    let ratio = |den: usize| (den > 0).then(|| Ratio::new(hits, den as u64));
    PrecisionRecall {
        precision: ratio(sets.sanitised.len()),
        recall: ratio(sets.relevant.len()),
    }
}

pub fn ratio_to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// `"n/d"`, or `"undefined"` for an empty denominator.
pub fn format_ratio(r: Option<Ratio<u64>>) -> String {
    match r {
        Some(r) => format!("{}/{}", r.numer(), r.denom()),
        None => "undefined".to_string(),
    }
}

impl fmt::Display for PrecisionRecall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "precision {} recall {}",
            format_ratio(self.precision),
            format_ratio(self.recall)
        )
    }
}

/// Mean sanitised wall time over mean unsanitised wall time, per network mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Overhead {
    pub net_on: Option<f64>,
    pub net_off: Option<f64>,
}

fn mean_wall_time(records: &[RunRecord]) -> Option<f64> {
    (!records.is_empty()).then(|| records.iter().map(|r| r.wall_time).sum::<f64>() / records.len() as f64)
}

pub fn wall_time_ratio(sanitised: &[RunRecord], unsanitised: &[RunRecord]) -> Option<f64> {
    let base = mean_wall_time(unsanitised)?;
    let with = mean_wall_time(sanitised)?;
    (base > 0.0).then(|| with / base)
}

pub fn measure_overhead(report: &MatrixReport) -> Overhead {
    let ratio = |mode| {
        wall_time_ratio(
            report.records(ConfigKey::new(mode, true)),
            report.records(ConfigKey::new(mode, false)),
        )
    };
    Overhead {
        net_on: ratio(NetworkMode::On),
        net_off: ratio(NetworkMode::Off),
    }
}
