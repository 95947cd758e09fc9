//! Python bindings: outcomes, the event registry, the simulated network,
//! the sanitiser and the evaluation harness.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use flakeguard::eval::corpus::{build_corpus, CorpusVariant};
use flakeguard::eval::{format_ratio, precision_recall as pr, ratio_to_f64, run_matrix, EvalSets, Evaluation, MatrixConfig};
use flakeguard::model::ErrorDescriptor;
use flakeguard::netsim::{Endpoint, HttpGetError, HttpResponse};
use flakeguard::runner::ExecutionContext;
use flakeguard::{
    ContextId, EventRegistry, Extension, MatcherSet, NetworkErrorKind, NetworkMode, NetworkSanitiser, NetworkState,
    OutcomeState, RunOptions, TestId, TestOutcome,
};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

create_exception!(flakeguard_py, NetworkError, PyException);

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_state(s: &str) -> PyResult<OutcomeState> {
    OutcomeState::ALL
        .into_iter()
        .find(|o| o.as_str() == s)
        .ok_or_else(|| value_err(format!("unknown state `{s}`")))
}

#[pyclass(name = "TestOutcome", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyOutcome(TestOutcome);

#[pymethods]
impl PyOutcome {
    #[getter]
    fn state(&self) -> &'static str {
        self.0.state().as_str()
    }

    #[getter]
    fn message(&self) -> String {
        self.0.message().to_string()
    }

    #[getter]
    fn provenance(&self) -> Option<String> {
        self.0.provenance().map(str::to_string)
    }

    fn __repr__(&self) -> String {
        format!("TestOutcome({}, {:?}, {:?})", self.state(), self.0.message(), self.0.provenance())
    }
}

/// Classifies an execution result. `signal` is None for a normal return, or
/// one of "assumption", "assertion", "error".
#[pyfunction]
#[pyo3(signature = (signal=None, message=""))]
fn classify_outcome(signal: Option<&str>, message: &str) -> PyResult<PyOutcome> {
    use flakeguard::model::{classify_outcome, TestSignal};
    let result = match signal {
        None => Ok(()),
        Some("assumption") => Err(TestSignal::assumption(message)),
        Some("assertion") => Err(TestSignal::assertion(message)),
        Some("error") => Err(TestSignal::error("error", message)),
        Some(other) => return Err(value_err(format!("unknown signal `{other}`"))),
    };
    Ok(PyOutcome(classify_outcome(&result)))
}

#[pyclass(name = "EventRegistry", frozen)]
pub struct PyRegistry(Arc<EventRegistry>);

#[pymethods]
impl PyRegistry {
    #[new]
    #[pyo3(signature = (context_scoping=false))]
    fn new(context_scoping: bool) -> Self {
        Self(Arc::new(EventRegistry::new(context_scoping)))
    }

    #[getter]
    fn context_scoping(&self) -> bool {
        self.0.context_scoping()
    }

    fn record_creation(&self, kind: &str, context: u64) -> PyResult<u64> {
        let kind: NetworkErrorKind = kind.parse().map_err(value_err)?;
        Ok(self.0.record_creation(kind, ContextId::from_raw(context)))
    }

    fn clear_window(&self, context: u64) {
        self.0.clear_window(ContextId::from_raw(context));
    }

    fn has_event(&self, context: u64) -> bool {
        self.0.has_event(ContextId::from_raw(context))
    }

    /// `(seq, kind, context)` for each event visible from `context`.
    fn events(&self, context: u64) -> Vec<(u64, String, u64)> {
        self.0
            .events_for(ContextId::from_raw(context))
            .into_iter()
            .map(|e| (e.seq, e.kind.to_string(), e.context.raw()))
            .collect()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

type Pages = Arc<RwLock<BTreeMap<(String, u16), BTreeMap<String, String>>>>;

/// A simulated network with its own event registry.
#[pyclass(name = "Network", frozen)]
pub struct PyNetwork {
    net: flakeguard::Network,
    registry: Py<PyRegistry>,
    pages: Pages,
}

#[pymethods]
impl PyNetwork {
    #[new]
    #[pyo3(signature = (mode="on", config=None, context_scoping=false))]
    fn new(py: Python<'_>, mode: &str, config: Option<&str>, context_scoping: bool) -> PyResult<Self> {
        let mut state = match config {
            Some(text) => NetworkState::parse_config(text).map_err(value_err)?,
            None => NetworkState::default(),
        };
        state.mode = mode.parse().map_err(value_err)?;
        let registry = Arc::new(EventRegistry::new(context_scoping));
        Ok(Self {
            net: flakeguard::Network::new(Arc::clone(&registry), state),
            registry: Py::new(py, PyRegistry(registry))?,
            pages: Pages::default(),
        })
    }

    #[getter]
    fn registry(&self, py: Python<'_>) -> Py<PyRegistry> {
        self.registry.clone_ref(py)
    }

    #[getter]
    fn mode(&self) -> &'static str {
        self.net.mode().as_str()
    }

    fn set_mode(&self, mode: &str) -> PyResult<()> {
        self.net.set_mode(mode.parse().map_err(value_err)?);
        Ok(())
    }

    /// Serves `body` for `GET http://host:port/path`.
    #[pyo3(signature = (host, path, body, port=80))]
    fn add_page(&self, host: &str, path: &str, body: &str, port: u16) -> PyResult<()> {
        let key = (host.to_string(), port);
        let mut pages = self.pages.write().map_err(value_err)?;
        let fresh = !pages.contains_key(&key);
        pages.entry(key.clone()).or_default().insert(path.to_string(), body.to_string());
        drop(pages);
        if fresh {
            let pages = Arc::clone(&self.pages);
            self.net
                .register_endpoint(Endpoint::http(host, port, move |p| {
                    let pages = pages.read().expect("pages poisoned");
                    match pages.get(&key).and_then(|m| m.get(p)) {
                        Some(body) => HttpResponse::ok(body.clone()),
                        None => HttpResponse::not_found(),
                    }
                }))
                .map_err(value_err)?;
        }
        Ok(())
    }

    /// Returns `(status, body)`; network failures raise `NetworkError`.
    fn http_get(&self, url: &str) -> PyResult<(u16, String)> {
        match self.net.http_get(url) {
            Ok(r) => Ok((r.status, r.body_text())),
            Err(HttpGetError::Network(e)) => Err(NetworkError::new_err((e.kind().to_string(), e.to_string()))),
            Err(e) => Err(value_err(e)),
        }
    }

    fn ping(&self, host: &str) -> bool {
        self.net.ping(host)
    }
}

/// Applies the sanitising rules to one raw outcome.
#[pyfunction]
#[pyo3(signature = (state, message, registry, context, cause_chain=Vec::new()))]
fn sanitise(
    state: &str,
    message: &str,
    registry: &PyRegistry,
    context: u64,
    cause_chain: Vec<(String, String)>,
) -> PyResult<PyOutcome> {
    let raw = match parse_state(state)? {
        OutcomeState::Success => TestOutcome::success(),
        OutcomeState::Failure => TestOutcome::failure(message),
        OutcomeState::Error => TestOutcome::error(message),
        OutcomeState::Skipped => TestOutcome::skipped(message, "external: skipped"),
    };
    let chain = cause_chain.into_iter().map(|(k, m)| ErrorDescriptor::new(k, m)).collect();
    let ctx = ExecutionContext::new(TestId::new("python", "sanitise"), ContextId::from_raw(context)).with_cause_chain(chain);
    Ok(PyOutcome(flakeguard::sanitise(&raw, &ctx, &registry.0, &MatcherSet::with_built_in())))
}

/// Exact precision and recall as `"n/d"` strings (or None when undefined)
/// together with their float values.
#[pyfunction]
fn precision_recall<'py>(
    py: Python<'py>,
    relevant: BTreeSet<String>,
    sanitised: BTreeSet<String>,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let to_ids = |s: BTreeSet<String>| s.into_iter().map(|id| TestId::new("", &id)).collect();
    let result = pr(&EvalSets {
        relevant: to_ids(relevant),
        sanitised: to_ids(sanitised),
    });
    let d = pyo3::types::PyDict::new(py);
    let exact = |r: Option<_>| r.is_some().then(|| format_ratio(r));
    d.set_item("precision", exact(result.precision))?;
    d.set_item("recall", exact(result.recall))?;
    d.set_item("precision_value", result.precision.map(ratio_to_f64))?;
    d.set_item("recall_value", result.recall.map(ratio_to_f64))?;
    Ok(d)
}

/// Context id of the calling thread, as recorded with network errors it creates.
#[pyfunction]
fn current_context() -> u64 {
    ContextId::current().raw()
}

#[pyfunction]
fn corpus_suites() -> Vec<&'static str> {
    CorpusVariant::ALL.iter().map(|v| v.suite_name()).collect()
}

/// Runs a corpus suite once and returns `{test id: state}`.
#[pyfunction]
#[pyo3(signature = (suite, sanitise=false, network="on", context_scoping=false))]
fn run_suite(suite: &str, sanitise: bool, network: &str, context_scoping: bool) -> PyResult<BTreeMap<String, String>> {
    let variant: CorpusVariant = suite.parse().map_err(value_err)?;
    let mode: NetworkMode = network.parse().map_err(value_err)?;
    let registry = Arc::new(EventRegistry::new(context_scoping));
    let net = Arc::new(flakeguard::Network::new(Arc::clone(&registry), NetworkState::default().with_mode(mode)));
    let suite = build_corpus(variant, &net);
    let exts: Vec<Arc<dyn Extension>> = if sanitise {
        vec![Arc::new(NetworkSanitiser::new(registry, Arc::new(MatcherSet::with_built_in())))]
    } else {
        Vec::new()
    };
    let record = flakeguard::run_suite(&suite, &exts, &RunOptions::sequential());
    Ok(record
        .outcomes
        .iter()
        .map(|(id, o)| (id.to_string(), o.state().as_str().to_string()))
        .collect())
}

/// Runs the evaluation matrix on a corpus suite and returns the report as JSON text.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (suite, runs=10, seed=0, parallel=false, context_scoping=false, net_config=None, out=None))]
fn evaluate(
    py: Python<'_>,
    suite: &str,
    runs: usize,
    seed: u64,
    parallel: bool,
    context_scoping: bool,
    net_config: Option<&str>,
    out: Option<PathBuf>,
) -> PyResult<String> {
    let variant: CorpusVariant = suite.parse().map_err(value_err)?;
    let network = match net_config {
        Some(text) => NetworkState::parse_config(text).map_err(value_err)?,
        None => NetworkState::default(),
    };
    let config = MatrixConfig {
        runs,
        seed,
        parallel,
        workers: if parallel { 4 } else { 1 },
        context_scoping,
        network,
        ..MatrixConfig::default()
    };
    let eval = py
        .detach(|| run_matrix(variant.factory(), &config).map(Evaluation::new))
        .map_err(value_err)?;
    if let Some(path) = out {
        flakeguard::eval::emit_report(&eval, &path).map_err(value_err)?;
    }
    serde_json::to_string_pretty(&eval.to_json()).map_err(value_err)
}

#[pymodule]
fn flakeguard_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NetworkError", m.py().get_type::<NetworkError>())?;
    m.add_class::<PyOutcome>()?;
    m.add_class::<PyRegistry>()?;
    m.add_class::<PyNetwork>()?;
    m.add_function(wrap_pyfunction!(classify_outcome, m)?)?;
    m.add_function(wrap_pyfunction!(sanitise, m)?)?;
    m.add_function(wrap_pyfunction!(precision_recall, m)?)?;
    m.add_function(wrap_pyfunction!(current_context, m)?)?;
    m.add_function(wrap_pyfunction!(corpus_suites, m)?)?;
    m.add_function(wrap_pyfunction!(run_suite, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
