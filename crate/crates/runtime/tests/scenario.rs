use std::path::{Path, PathBuf};
use std::time::Duration;

use serde_json::json;

use sally_core::mockapp::Verdict;
use sally_core::services::CONCEPT_KEY;
use sally_runtime::scenario::{self, ScenarioBundle, ScenarioError};

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn bundle(value: serde_json::Value) -> ScenarioBundle {
    serde_json::from_value(value).unwrap()
}

fn fixtures() -> PathBuf {
    repo().join("fixtures")
}

#[tokio::test]
async fn shipped_linker_bundle_passes() {
    let report = scenario::run(repo().join("scenarios/e2e-linker.json")).await.unwrap();
    assert!(report.passed(), "{}", serde_json::to_string_pretty(&report).unwrap());
    assert_eq!(report.exit_code(), 0);
    let links: Vec<_> = report.records.iter().filter(|r| r.key == CONCEPT_KEY).collect();
    assert_eq!(links.len(), 1);
    assert_eq!(links[0].value, json!("uri:vertex"));
}

#[tokio::test]
async fn shipped_focus_bundle_records_focus_in_second_app() {
    let report = scenario::run(repo().join("scenarios/multi-app-focus.json")).await.unwrap();
    assert!(report.passed(), "{}", serde_json::to_string_pretty(&report).unwrap());
    let beta = report.app("beta").unwrap();
    assert_eq!(beta.focus.len(), 1);
    assert_eq!(beta.selection.len(), 1);
    assert_eq!(beta.selection[0].locator, "shape:V");
}

#[test]
fn missing_fixture_is_a_config_error() {
    let b = bundle(json!({
        "name": "broken",
        "services": {"ontology": "ontology/geometry.json"},
        "apps": [{"name": "a", "doc": "docs/nope.json", "implements": ["core.selection/1"]}]
    }));
    match scenario::prepare_bundle(b, &fixtures()) {
        Err(ScenarioError::Config(msg)) => assert!(msg.contains("nope.json"), "{msg}"),
        Err(e) => panic!("wrong error {e}"),
        Ok(_) => panic!("prepared a bundle with a missing document"),
    }
}

#[test]
fn script_naming_unknown_app_is_rejected() {
    let b = bundle(json!({
        "name": "x",
        "services": {"ontology": "ontology/geometry.json"},
        "apps": [{"name": "a", "doc": "docs/worksheet.json", "implements": ["core.selection/1"]}],
        "script": [{"app": "ghost", "action": "request_menu"}]
    }));
    assert!(matches!(scenario::prepare_bundle(b, &fixtures()), Err(ScenarioError::Config(_))));
}

#[test]
fn unknown_bundle_fields_are_rejected() {
    let parsed: Result<ScenarioBundle, _> = serde_json::from_value(json!({
        "name": "x",
        "services": {"ontology": "o.json"},
        "apps": [],
        "colour": "red"
    }));
    assert!(parsed.is_err());
}

#[tokio::test]
async fn occupied_port_fails_before_any_script() {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let port = listener.local_addr().unwrap().port();
    let b = bundle(json!({
        "name": "busy",
        "broker": {"port": port},
        "services": {"ontology": "ontology/geometry.json"},
        "apps": [{"name": "a", "doc": "docs/worksheet.json", "implements": ["core.selection/1"]}]
    }));
    let prepared = scenario::prepare_bundle(b, &fixtures()).unwrap();
    match prepared.run().await {
        Err(e @ ScenarioError::Launch(_)) => assert_eq!(e.exit_code(), 2),
        other => panic!("expected a launch error, got {:?}", other.map(|r| r.verdict)),
    }
}

#[tokio::test]
async fn failing_expectation_fails_the_run() {
    let b = bundle(json!({
        "name": "absent-menu",
        "services": {"ontology": "ontology/geometry.json"},
        "apps": [{"name": "a", "doc": "docs/worksheet.json", "implements": ["core.selection/1", "core.menu/1"]}],
        "stepTimeoutMs": 300,
        "script": [
            {"app": "a", "action": "select", "objects": ["p1:0-24"]},
            {"app": "a", "action": "request_menu"},
            {"app": "a", "action": "expect_menu", "match": "contains-label", "label": "Get definition"},
            {"app": "a", "action": "request_menu"}
        ]
    }));
    let report = scenario::prepare_bundle(b, &fixtures()).unwrap().run().await.unwrap();
    assert_eq!(report.verdict, Verdict::Fail);
    assert_eq!(report.exit_code(), 1);
    // stops at the failing step
    assert_eq!(report.script.len(), 3);
    assert_eq!(report.script[2].step.verdict, Verdict::Fail);
}

#[tokio::test]
async fn expected_report_mismatch_fails() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("expected.json"), r#"{"scenario": "something else"}"#).unwrap();
    let b = bundle(json!({
        "name": "mismatch",
        "services": {"ontology": fixtures().join("ontology/geometry.json")},
        "apps": [{"name": "a", "doc": fixtures().join("docs/worksheet.json"), "implements": ["core.selection/1"]}],
        "expectedReport": "expected.json"
    }));
    let report = scenario::prepare_bundle(b, dir.path()).unwrap().run().await.unwrap();
    assert_eq!(report.verdict, Verdict::Fail);
    assert!(report.expectation.is_some());
}

#[tokio::test]
async fn wait_step_passes_after_its_duration() {
    let b = bundle(json!({
        "name": "wait",
        "services": {"ontology": "ontology/sample.json"},
        "apps": [{"name": "a", "doc": "docs/sketch.json", "implements": ["core.selection/1"]}],
        "script": [{"app": "a", "action": "wait", "ms": 120}]
    }));
    let started = std::time::Instant::now();
    let report = scenario::prepare_bundle(b, &fixtures()).unwrap().run().await.unwrap();
    assert!(report.passed());
    assert!(started.elapsed() >= Duration::from_millis(120));
}
