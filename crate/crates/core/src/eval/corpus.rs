//! Labelled scenario corpus for the evaluation harness.
//!
//! Each test follows one [`Scenario`]: a common way tests come to depend on
//! the network, a control, or one of the known blind spots of the
//! sanitiser. Every scenario states up front whether it belongs to the
//! relevant set and whether the sanitiser will skip it, so measured
//! precision and recall can be checked against exact expected values.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::model::{
    action, assert_that, assume_that, FixtureSet, Suite, TestCase, TestClass, TestId, TestSignal,
};
use crate::netsim::{Endpoint, HttpResponse, NetsimError, Network};
use crate::sanitiser::NetworkErrorKind;

use super::EvalSets;

pub const HELP_HOST: &str = "help.refmanager.example";
pub const SCHEMA_HOST: &str = "schemas.library.example";
pub const API_HOST: &str = "api.catalog.example";

const SCHEMA: &str = r#"<xs:schema><xs:element name="library"/><xs:element name="entry"/></xs:schema>"#;
const DOCUMENT: &str = r#"<library xsi:schemaLocation="http://schemas.library.example/library.xsd"><entry key="knuth1984"/></library>"#;

/// Number of genuine network tests in the reference-manager shaped corpus.
pub const JABREF_NETWORK_TESTS: usize = 56;
const JABREF_PLAIN_TESTS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scenario {
    /// No network use; always passes.
    PurePass,
    /// No network use; fails on an ordinary bug.
    PureFail,
    /// Fetches an online help page and lets the network error escape.
    OptimisticGet,
    /// Fetches a page but folds the network error into an assertion failure.
    NetworkAssertion,
    /// Network test switched off with the static disable marker.
    DisabledNetworkTest,
    /// Validates a document whose schema is fetched over the network; the
    /// network error is wrapped by the parser.
    HiddenSchemaFetch,
    /// The network call happens in the per-test set-up fixture.
    BeforeEachNetworkError,
    /// The network call happens in the per-class set-up fixture.
    BeforeAllNetworkError,
    /// Guards the network call with an explicit reachability assumption.
    AssumptionGuarded,
    /// Builds a network error on purpose, then fails for an unrelated
    /// reason. Sanitised although not network related.
    DeliberateErrorConstruction,
    /// The network call fails on a helper thread. Missed when the registry
    /// is scoped by context.
    BackgroundThreadNetworkError,
    /// Uses a lookup that reports failure as `false` without constructing
    /// an error value, so nothing is ever recorded.
    SwallowedNetworkError,
}

impl Scenario {
    pub const ALL: [Scenario; 12] = [
        Scenario::PurePass,
        Scenario::PureFail,
        Scenario::OptimisticGet,
        Scenario::NetworkAssertion,
        Scenario::DisabledNetworkTest,
        Scenario::HiddenSchemaFetch,
        Scenario::BeforeEachNetworkError,
        Scenario::BeforeAllNetworkError,
        Scenario::AssumptionGuarded,
        Scenario::DeliberateErrorConstruction,
        Scenario::BackgroundThreadNetworkError,
        Scenario::SwallowedNetworkError,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::PurePass => "pure-pass",
            Scenario::PureFail => "pure-fail",
            Scenario::OptimisticGet => "optimistic-network-get",
            Scenario::NetworkAssertion => "network-assertion",
            Scenario::DisabledNetworkTest => "disabled-network-test",
            Scenario::HiddenSchemaFetch => "hidden-schema-fetch",
            Scenario::BeforeEachNetworkError => "before-each-network-error",
            Scenario::BeforeAllNetworkError => "before-all-network-error",
            Scenario::AssumptionGuarded => "assumption-guarded",
            Scenario::DeliberateErrorConstruction => "deliberate-error-construction",
            Scenario::BackgroundThreadNetworkError => "background-thread-network-error",
            Scenario::SwallowedNetworkError => "swallowed-network-error",
        }
    }

    /// Known false positive or false negative of the sanitiser.
    pub fn is_limitation(self) -> bool {
        matches!(
            self,
            Scenario::DeliberateErrorConstruction
                | Scenario::BackgroundThreadNetworkError
                | Scenario::SwallowedNetworkError
        )
    }

    /// Whether the test really exercises the network.
    pub fn network_dependent(self) -> bool {
        !matches!(
            self,
            Scenario::PurePass | Scenario::PureFail | Scenario::DeliberateErrorConstruction
        )
    }

    /// Expected membership of the relevant set: passes with the network,
    /// fails or errors without it.
    pub fn relevant(self) -> bool {
        matches!(
            self,
            Scenario::OptimisticGet
                | Scenario::NetworkAssertion
                | Scenario::HiddenSchemaFetch
                | Scenario::BeforeEachNetworkError
                | Scenario::BackgroundThreadNetworkError
                | Scenario::SwallowedNetworkError
        )
    }

    /// Expected membership of the sanitised set.
    pub fn sanitised(self, context_scoping: bool) -> bool {
        match self {
            Scenario::OptimisticGet
            | Scenario::NetworkAssertion
            | Scenario::HiddenSchemaFetch
            | Scenario::BeforeEachNetworkError
            | Scenario::DeliberateErrorConstruction => true,
            Scenario::BackgroundThreadNetworkError => !context_scoping,
            _ => false,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CorpusVariant {
    /// Every scenario once, limitations included.
    Full,
    /// Every scenario except the known limitations.
    Core,
    /// 56 network tests, 20 plain tests and one unrelated failing test that
    /// constructs a network error, shaped after a reference manager's suite.
    JabrefShaped,
}

impl CorpusVariant {
    pub const ALL: [CorpusVariant; 3] = [CorpusVariant::Full, CorpusVariant::Core, CorpusVariant::JabrefShaped];

    pub fn suite_name(self) -> &'static str {
        match self {
            CorpusVariant::Full => "corpus",
            CorpusVariant::Core => "corpus-core",
            CorpusVariant::JabrefShaped => "jabref",
        }
    }

    /// Case names paired with their scenario, in suite order.
    pub fn cases(self) -> Vec<(String, Scenario)> {
        match self {
            CorpusVariant::Full => Scenario::ALL.iter().map(|s| (s.name().to_string(), *s)).collect(),
            CorpusVariant::Core => Scenario::ALL
                .iter()
                .filter(|s| !s.is_limitation())
                .map(|s| (s.name().to_string(), *s))
                .collect(),
            CorpusVariant::JabrefShaped => {
                let mut cases: Vec<(String, Scenario)> = (0..JABREF_NETWORK_TESTS)
                    .map(|i| (format!("help-topic-{i:02}"), Scenario::NetworkAssertion))
                    .collect();
                cases.extend((0..JABREF_PLAIN_TESTS).map(|i| (format!("citation-key-{i:02}"), Scenario::PurePass)));
                cases.push(("port-already-in-use".into(), Scenario::DeliberateErrorConstruction));
                cases
            }
        }
    }

    pub fn labels(self) -> Vec<(TestId, Scenario)> {
        self.cases()
            .into_iter()
            .map(|(name, s)| (TestId::new(self.suite_name(), &name), s))
            .collect()
    }

    /// Expected relevant and sanitised sets.
    pub fn ground_truth(self, context_scoping: bool) -> EvalSets {
        let labels = self.labels();
        let pick = |f: &dyn Fn(Scenario) -> bool| -> BTreeSet<TestId> {
            labels.iter().filter(|(_, s)| f(*s)).map(|(id, _)| id.clone()).collect()
        };
        EvalSets {
            relevant: pick(&|s| s.relevant()),
            sanitised: pick(&|s| s.sanitised(context_scoping)),
        }
    }

    /// A suite factory for [`super::run_matrix`].
    pub fn factory(self) -> impl Fn(&Arc<Network>) -> Suite {
        move |net| build_corpus(self, net)
    }
}

impl FromStr for CorpusVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CorpusVariant::ALL
            .into_iter()
            .find(|v| v.suite_name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = CorpusVariant::ALL.iter().map(|v| v.suite_name()).collect();
                format!("unknown suite `{s}` (expected one of {})", names.join(", "))
            })
    }
}

/// Registers the services the corpus talks to. Already registered
/// endpoints are left alone.
pub fn register_endpoints(net: &Network) -> Result<(), NetsimError> {
    let endpoints = [
        Endpoint::http(HELP_HOST, 80, |path| {
            if path.starts_with("/en/help") {
                HttpResponse::ok(format!("<html><h1>Help</h1><p>{path}</p></html>"))
            } else {
                HttpResponse::not_found()
            }
        }),
        Endpoint::http(SCHEMA_HOST, 80, |path| match path {
            "/library.xsd" => HttpResponse::ok(SCHEMA),
            _ => HttpResponse::not_found(),
        }),
        Endpoint::http(API_HOST, 80, |path| match path {
            "/status" => HttpResponse::ok(r#"{"status":"ok"}"#),
            p if p.starts_with("/entries/") => HttpResponse::ok(r#"{"key":"knuth1984"}"#),
            _ => HttpResponse::not_found(),
        }),
    ];
    for e in endpoints {
        match net.register_endpoint(e) {
            Ok(()) | Err(NetsimError::DuplicateEndpoint(..)) => {}
            Err(other) => return Err(other),
        }
    }
    Ok(())
}

/// Builds the corpus suite against `net`, registering its endpoints first.
pub fn build_corpus(variant: CorpusVariant, net: &Arc<Network>) -> Suite {
    register_endpoints(net).expect("corpus endpoints");
    let mut suite = Suite::new(variant.suite_name());
    for (name, scenario) in variant.cases() {
        let case = scenario_case(suite.name.as_str(), &name, scenario, net);
        suite.add(case).expect("corpus case names are unique");
    }
    suite
}

fn citation_key(author: &str, year: u32) -> String {
    format!("{}{year}", author.to_lowercase())
}

// Integer mean with a truncation bug, for the ordinary failing test.
fn mean_rating(ratings: &[u32]) -> f64 {
    (ratings.iter().sum::<u32>() / ratings.len() as u32) as f64
}

// Stand-in for a port check whose mock is wired up wrongly.
fn port_in_use(_port: u16) -> bool {
    false
}

fn schema_location(doc: &str) -> Option<&str> {
    let start = doc.find("schemaLocation=\"")? + "schemaLocation=\"".len();
    let len = doc[start..].find('"')?;
    Some(&doc[start..start + len])
}

// Validating parse: resolving the schema needs the network.
fn validate_document(net: &Network, doc: &str) -> Result<usize, TestSignal> {
    let location = schema_location(doc)
        .ok_or_else(|| TestSignal::error("DocumentParseError", "no schema location"))?;
    let schema = net.http_get(location).map_err(|e| {
        TestSignal::from(e).wrap("DocumentParseError", format!("cannot resolve schema {location}"))
    })?;
    if schema.status != 200 || !schema.body_text().contains("entry") {
        return Err(TestSignal::error("DocumentParseError", "schema does not declare entry"));
    }
    Ok(doc.matches("<entry").count())
}

fn scenario_case(suite: &str, name: &str, scenario: Scenario, net: &Arc<Network>) -> TestCase {
    let n = Arc::clone(net);
    match scenario {
        Scenario::PurePass => TestCase::new(
            suite,
            name,
            action(|| assert_that(citation_key("Knuth", 1984) == "knuth1984", "citation key format")),
        ),
        Scenario::PureFail => TestCase::new(
            suite,
            name,
            action(|| assert_that(mean_rating(&[4, 5]) == 4.5, "mean rating of 4 and 5")),
        ),
        Scenario::OptimisticGet => TestCase::new(
            suite,
            name,
            action(move || {
                let page = n.http_get(&format!("http://{HELP_HOST}/en/help"))?;
                assert_that(page.status == 200, "help page status")?;
                assert_that(page.body_text().contains("Help"), "help page content")
            }),
        ),
        Scenario::NetworkAssertion => {
            let url = format!("http://{HELP_HOST}/en/help/{name}");
            TestCase::new(
                suite,
                name,
                action(move || {
                    let available = n.http_get(&url).map(|r| r.status == 200).unwrap_or(false);
                    assert_that(available, format!("{url} should be available"))
                }),
            )
        }
        Scenario::DisabledNetworkTest => TestCase::new(
            suite,
            name,
            action(move || {
                let page = n.http_get(&format!("http://{HELP_HOST}/en/help"))?;
                assert_that(page.status == 200, "help page status")
            }),
        )
        .disabled(),
        Scenario::HiddenSchemaFetch => TestCase::new(
            suite,
            name,
            action(move || {
                let entries = validate_document(&n, DOCUMENT)?;
                assert_that(entries == 1, "document has one entry")
            }),
        ),
        Scenario::BeforeEachNetworkError => {
            let class = TestClass::new(
                "RemoteCatalogTest",
                FixtureSet::new().before_each(action(move || {
                    let status = n.http_get(&format!("http://{API_HOST}/status"))?;
                    assert_that(status.status == 200, "catalog status")
                })),
            );
            TestCase::new(
                suite,
                name,
                action(|| assert_that(citation_key("Lamport", 1994) == "lamport1994", "citation key")),
            )
            .in_class(&class)
        }
        Scenario::BeforeAllNetworkError => {
            let class = TestClass::new(
                "SchemaCacheTest",
                FixtureSet::new().before_all(action(move || {
                    n.http_get(&format!("http://{SCHEMA_HOST}/library.xsd"))?;
                    Ok(())
                })),
            );
            TestCase::new(
                suite,
                name,
                action(|| assert_that(schema_location(DOCUMENT).is_some(), "schema location present")),
            )
            .in_class(&class)
        }
        Scenario::AssumptionGuarded => TestCase::new(
            suite,
            name,
            action(move || {
                assume_that(n.ping(API_HOST), "catalog service reachable")?;
                let entry = n.http_get(&format!("http://{API_HOST}/entries/1"))?;
                assert_that(entry.body_text().contains("knuth1984"), "entry payload")
            }),
        ),
        Scenario::DeliberateErrorConstruction => TestCase::new(
            suite,
            name,
            action(move || {
                let expected = n.error(
                    NetworkErrorKind::UnknownHost,
                    "UnknownHost",
                    "invalid.example: lookup expected to fail",
                );
                assert_that(expected.kind() == &NetworkErrorKind::UnknownHost, "error kind")?;
                assert_that(port_in_use(6050), "port 6050 should be reported in use")
            }),
        ),
        Scenario::BackgroundThreadNetworkError => TestCase::new(
            suite,
            name,
            action(move || {
                let worker = Arc::clone(&n);
                let refreshed = std::thread::spawn(move || {
                    worker.http_get(&format!("http://{API_HOST}/entries/2")).is_ok()
                })
                .join()
                .unwrap_or(false);
                assert_that(refreshed, "background refresh fetched the catalog")
            }),
        ),
        Scenario::SwallowedNetworkError => TestCase::new(
            suite,
            name,
            action(move || assert_that(n.ping(API_HOST), "catalog host answers ping")),
        ),
    }
}
