use std::fs;
use std::process::{Command, Output};

fn flakeguard(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flakeguard"))
        .args(args)
        .env_remove("FLAKEGUARD_AUTODETECT")
        .env_remove("FLAKEGUARD_SANITISE")
        .env_remove("FLAKEGUARD_CONTEXT_SCOPING")
        .env_remove("FLAKEGUARD_MATCHERS")
        .output()
        .expect("spawn flakeguard")
}

fn eval(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flakeguard-eval"))
        .args(args)
        .env_remove("FLAKEGUARD_MATCHERS")
        .output()
        .expect("spawn flakeguard-eval")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_exit_code_follows_build_semantics() {
    // The core corpus has one ordinary failing test, so it always fails the build.
    let out = flakeguard(&["run", "--suite", "corpus-core", "--sanitise", "on", "--network", "off"]);
    assert_eq!(out.status.code(), Some(1), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("skipped  corpus-core::optimistic-network-get"), "{text}");
    assert!(text.contains("failure  corpus-core::pure-fail"), "{text}");
}

#[test]
fn sanitising_turns_a_broken_network_build_green() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("net.conf");
    fs::write(&net, "mode = off\n").unwrap();
    let net = net.to_str().unwrap();

    let plain = flakeguard(&["run", "--suite", "jabref", "--sanitise", "off", "--net-config", net]);
    assert_eq!(plain.status.code(), Some(1));
    assert!(stdout(&plain).contains("57 failure"), "{}", stdout(&plain));

    // Only the unrelated failing test that builds a network error remains,
    // and it is sanitised too, so the build passes.
    let sanitised = flakeguard(&["run", "--suite", "jabref", "--sanitise", "on", "--net-config", net]);
    assert_eq!(sanitised.status.code(), Some(0), "{}", stdout(&sanitised));
    assert!(stdout(&sanitised).contains("57 skipped"));
}

#[test]
fn autodetect_loads_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("extensions.manifest"), "# extensions\nnetwork-sanitiser\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_flakeguard"))
        .args(["run", "--suite", "jabref", "--network", "off", "--manifest-dir"])
        .arg(dir.path())
        .env("FLAKEGUARD_AUTODETECT", "true")
        .env_remove("FLAKEGUARD_SANITISE")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));

    fs::write(dir.path().join("extensions.manifest"), "no-such-extension\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_flakeguard"))
        .args(["run", "--suite", "jabref", "--manifest-dir"])
        .arg(dir.path())
        .env("FLAKEGUARD_AUTODETECT", "true")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sanitise_can_come_from_the_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_flakeguard"))
        .args(["run", "--suite", "jabref", "--network", "off"])
        .env_remove("FLAKEGUARD_AUTODETECT")
        .env("FLAKEGUARD_SANITISE", "on")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));

    let out = Command::new(env!("CARGO_BIN_EXE_flakeguard"))
        .args(["run", "--suite", "jabref"])
        .env_remove("FLAKEGUARD_AUTODETECT")
        .env("FLAKEGUARD_SANITISE", "maybe")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let out = flakeguard(&["run", "--suite", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown suite"));
}

#[test]
fn eval_writes_a_complete_report() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("net.conf");
    fs::write(&net, "mode = on\nlatency_ms = 0\n").unwrap();
    let report = dir.path().join("report.json");
    let out = eval(&[
        "--suite", "corpus", "--runs", "3", "--seed", "11", "--parallel", "on", "--context-scoping", "on",
        "--net-config", net.to_str().unwrap(), "--out", report.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    for field in ["config", "runs", "per_test_outcomes", "t_r", "t_s", "precision", "recall", "flaky", "weakly_flaky", "overhead"] {
        assert!(doc.get(field).is_some(), "missing {field}");
    }
    assert_eq!(doc["precision_exact"], "4/5");
    assert_eq!(doc["recall_exact"], "2/3");
    assert_eq!(doc["config"]["runs"], 3);
    assert_eq!(doc["runs"]["net-off/sanitised"].as_array().unwrap().len(), 3);
}

#[test]
fn eval_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let out = eval(&["--suite", "corpus", "--runs", "0", "--out", report.to_str().unwrap()]);
    assert!(!out.status.success());
    let bad = dir.path().join("bad.conf");
    fs::write(&bad, "mode = sideways\n").unwrap();
    let out = eval(&["--suite", "corpus", "--net-config", bad.to_str().unwrap(), "--out", report.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(!report.exists());
}
