use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::model::{OutcomeState, TestId};

use super::metrics::{
    classify_flakiness, format_ratio, measure_overhead, precision_recall, ratio_to_f64, EvalSets,
    FlakinessReport, Overhead, PrecisionRecall,
};
use super::{ConfigKey, EvalError, MatrixReport};

fn ids(set: &BTreeSet<TestId>) -> Vec<&str> {
    set.iter().map(TestId::as_str).collect()
}

/// A matrix report together with everything derived from it.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: MatrixReport,
    pub sets: EvalSets,
    pub precision_recall: PrecisionRecall,
    pub flakiness: BTreeMap<ConfigKey, FlakinessReport>,
    pub overhead: Overhead,
}

impl Evaluation {
    pub fn new(report: MatrixReport) -> Self {
        let sets = EvalSets::from_report(&report);
        let precision_recall = precision_recall(&sets);
        let flakiness = ConfigKey::ALL
            .iter()
            .map(|k| (*k, classify_flakiness(report.records(*k))))
            .collect();
        let overhead = measure_overhead(&report);
        Self {
            report,
            sets,
            precision_recall,
            flakiness,
            overhead,
        }
    }

    /// The report document. Only `runs[*][*].wall_time` and `overhead`
    /// depend on timing; everything else is a function of the inputs.
    pub fn to_json(&self) -> Value {
        let cfg = &self.report.config;
        let ratio = |r| match r {
            Some(r) => json!(ratio_to_f64(r)),
            None => json!("undefined"),
        };

        let mut runs = Map::new();
        let mut means = Map::new();
        let mut per_test = Map::new();
        let mut flaky = Map::new();
        let mut weakly = Map::new();
        for key in ConfigKey::ALL {
            let records = self.report.records(key);
            let mut totals = [0usize; 4];
            let entries: Vec<Value> = records
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let counts = OutcomeState::ALL.map(|s| r.count(s));
                    for (t, c) in totals.iter_mut().zip(counts) {
                        *t += c;
                    }
                    json!({
                        "run": i,
                        "success": counts[0],
                        "failure": counts[1],
                        "error": counts[2],
                        "skipped": counts[3],
                        "wall_time": r.wall_time,
                    })
                })
                .collect();
            runs.insert(key.label(), Value::Array(entries));
            let n = records.len().max(1) as f64;
            means.insert(
                key.label(),
                json!({
                    "success": totals[0] as f64 / n,
                    "failure": totals[1] as f64 / n,
                    "error": totals[2] as f64 / n,
                    "skipped": totals[3] as f64 / n,
                }),
            );

            let mut tests = Map::new();
            for id in &self.report.test_ids {
                let states: Vec<&str> = self.report.states(key, id).iter().map(|s| s.as_str()).collect();
                tests.insert(id.to_string(), json!(states));
            }
            per_test.insert(key.label(), Value::Object(tests));

            let f = &self.flakiness[&key];
            flaky.insert(key.label(), json!(ids(&f.flaky)));
            weakly.insert(key.label(), json!(ids(&f.weakly_flaky)));
        }

        json!({
            "suite": self.report.suite_name,
            "config": {
                "runs": cfg.runs,
                "seed": cfg.seed,
                "parallel": cfg.parallel,
                "workers": cfg.workers,
                "context_scoping": cfg.context_scoping,
                "network": cfg.network.to_config(),
                "matchers": cfg.matchers.matchers().iter().map(|m| m.name()).collect::<Vec<_>>(),
            },
            "tests": self.report.test_ids.iter().map(TestId::as_str).collect::<Vec<_>>(),
            "runs": runs,
            "mean_counts": means,
            "per_test_outcomes": per_test,
            "t_r": ids(&self.sets.relevant),
            "t_s": ids(&self.sets.sanitised),
            "precision": ratio(self.precision_recall.precision),
            "recall": ratio(self.precision_recall.recall),
            "precision_exact": format_ratio(self.precision_recall.precision),
            "recall_exact": format_ratio(self.precision_recall.recall),
            "flaky": flaky,
            "weakly_flaky": weakly,
            "overhead": {
                "net_on": self.overhead.net_on,
                "net_off": self.overhead.net_off,
            },
        })
    }
}

/// Writes the evaluation as pretty-printed JSON.
pub fn emit_report(evaluation: &Evaluation, path: &Path) -> Result<(), EvalError> {
    let mut text = serde_json::to_string_pretty(&evaluation.to_json())?;
    text.push('\n');
    fs::write(path, text).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })
}
