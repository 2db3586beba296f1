//! Scenario bundles: a broker, the service bundle and scripted mock apps,
//! launched in-process, run to completion and torn down in reverse order.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use sally_core::adm::SemanticRecord;
use sally_core::mockapp::{load_script, subset, AppReport, MockDocument, ScriptStep, StepReport, Verdict};
use sally_core::protocol::{standard_modules, ModuleInterfaceId};
use sally_core::registry::load_module_file;
use sally_core::services::{Ontology, ServiceRegistry};

use crate::broker::{self, BrokerConfig, DEFAULT_MENU_TIMEOUT};
use crate::mockapp::{self, MockAppConfig, MockAppHandle, DEFAULT_STEP_TIMEOUT};
use crate::services;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    /// Bad bundle or missing fixture; nothing was started.
    #[error("invalid scenario: {0}")]
    Config(String),
    /// Something failed while starting the parts.
    #[error("launch failed: {0}")]
    Launch(String),
}

impl ScenarioError {
    pub fn exit_code(&self) -> i32 {
        2
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct BrokerSection {
    #[serde(default)]
    pub port: u16,
    #[serde(default)]
    pub modules: Option<PathBuf>,
    #[serde(default)]
    pub store: Option<PathBuf>,
    #[serde(default)]
    pub menu_timeout_ms: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ServicesSection {
    pub ontology: PathBuf,
    /// Subset of services to run; all when absent.
    #[serde(default)]
    pub names: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AppSection {
    pub name: String,
    pub doc: PathBuf,
    pub implements: Vec<ModuleInterfaceId>,
    #[serde(default)]
    pub script: Option<PathBuf>,
}

/// A step of the bundle-level script, addressed to one app.
#[derive(Debug, Clone, Deserialize)]
pub struct BundleStep {
    pub app: String,
    #[serde(flatten)]
    pub step: ScriptStep,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ScenarioBundle {
    pub name: String,
    #[serde(default)]
    pub broker: BrokerSection,
    pub services: ServicesSection,
    pub apps: Vec<AppSection>,
    /// Runs after the per-app scripts, one step at a time.
    #[serde(default)]
    pub script: Vec<BundleStep>,
    #[serde(default)]
    pub step_timeout_ms: Option<u64>,
    #[serde(default)]
    pub expected_report: Option<PathBuf>,
}

/// Everything loaded and checked, ready to launch.
pub struct PreparedScenario {
    pub name: String,
    broker: BrokerConfig,
    ontology: Arc<Ontology>,
    service_names: Option<Vec<String>>,
    apps: Vec<(MockAppConfig, Vec<ScriptStep>)>,
    script: Vec<BundleStep>,
    expected: Option<serde_json::Value>,
    _store_dir: Option<tempfile::TempDir>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ScenarioReport {
    pub scenario: String,
    pub verdict: Verdict,
    pub elapsed_ms: u128,
    pub apps: Vec<AppReport>,
    /// Steps of the bundle-level script, with the app each ran in.
    pub script: Vec<BundleStepReport>,
    pub records: Vec<SemanticRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expectation: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BundleStepReport {
    pub app: String,
    #[serde(flatten)]
    pub step: StepReport,
}

impl ScenarioReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }

    pub fn app(&self, name: &str) -> Option<&AppReport> {
        self.apps.iter().find(|a| a.app == name)
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn existing(base: &Path, p: &Path, what: &str) -> Result<PathBuf, ScenarioError> {
    let full = resolve(base, p);
    if full.exists() {
        Ok(full)
    } else {
        Err(ScenarioError::Config(format!("{what} {} does not exist", full.display())))
    }
}

/// Loads a bundle and every fixture it references. Relative paths are
/// taken from the bundle's directory.
pub fn prepare(path: impl AsRef<Path>) -> Result<PreparedScenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| ScenarioError::Config(format!("cannot read {}: {e}", path.display())))?;
    let bundle: ScenarioBundle =
        serde_json::from_str(&text).map_err(|e| ScenarioError::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    prepare_bundle(bundle, base)
}

pub fn prepare_bundle(bundle: ScenarioBundle, base: &Path) -> Result<PreparedScenario, ScenarioError> {
    let cfg = |e: &dyn std::fmt::Display| ScenarioError::Config(e.to_string());

    let modules = match &bundle.broker.modules {
        Some(p) => load_module_file(existing(base, p, "module file")?).map_err(|e| cfg(&e))?,
        None => standard_modules(),
    };
    let ontology = Ontology::load(existing(base, &bundle.services.ontology, "ontology")?).map_err(|e| cfg(&e))?;
    if let Some(names) = &bundle.services.names {
        let known = ServiceRegistry::standard().names();
        if let Some(bad) = names.iter().find(|n| !known.contains(&n.as_str())) {
            return Err(ScenarioError::Config(format!("unknown service {bad:?}")));
        }
    }
    let step_timeout = bundle.step_timeout_ms.map_or(DEFAULT_STEP_TIMEOUT, Duration::from_millis);

    let mut apps = Vec::new();
    let mut seen = BTreeSet::new();
    for a in &bundle.apps {
        if !seen.insert(a.name.clone()) {
            return Err(ScenarioError::Config(format!("duplicate app name {:?}", a.name)));
        }
        let document = MockDocument::load(existing(base, &a.doc, "document")?).map_err(|e| cfg(&e))?;
        let steps = match &a.script {
            Some(p) => load_script(existing(base, p, "script")?).map_err(|e| cfg(&e))?,
            None => Vec::new(),
        };
        apps.push((
            MockAppConfig {
                name: a.name.clone(),
                document,
                implements: a.implements.iter().cloned().collect(),
                step_timeout,
            },
            steps,
        ));
    }
    for (i, s) in bundle.script.iter().enumerate() {
        if !seen.contains(&s.app) {
            return Err(ScenarioError::Config(format!("script step {} names unknown app {:?}", i + 1, s.app)));
        }
        s.step
            .validate()
            .map_err(|e| ScenarioError::Config(format!("script step {}: {e}", i + 1)))?;
    }
    let expected = match &bundle.expected_report {
        Some(p) => {
            let p = existing(base, p, "expected report")?;
            let text = std::fs::read_to_string(&p).map_err(|e| cfg(&e))?;
            Some(serde_json::from_str(&text).map_err(|e| cfg(&e))?)
        }
        None => None,
    };

    let (store, store_dir) = match &bundle.broker.store {
        Some(p) => (resolve(base, p), None),
        None => {
            let dir = tempfile::TempDir::new().map_err(|e| cfg(&e))?;
            (dir.path().join("store.json"), Some(dir))
        }
    };
    let broker = BrokerConfig {
        port: bundle.broker.port,
        modules,
        store: Some(store),
        menu_timeout: bundle.broker.menu_timeout_ms.map_or(DEFAULT_MENU_TIMEOUT, Duration::from_millis),
        ..BrokerConfig::default()
    };
    Ok(PreparedScenario {
        name: bundle.name,
        broker,
        ontology: Arc::new(ontology),
        service_names: bundle.services.names,
        apps,
        script: bundle.script,
        expected,
        _store_dir: store_dir,
    })
}

impl PreparedScenario {
    pub async fn run(self) -> Result<ScenarioReport, ScenarioError> {
        let started = Instant::now();
        let launch = |e: &dyn std::fmt::Display| ScenarioError::Launch(e.to_string());

        let broker = broker::start(self.broker.clone()).await.map_err(|e| launch(&e))?;
        let url = broker.ws_url();
        let services = match services::start(&url, Arc::clone(&self.ontology), &ServiceRegistry::standard(), self.service_names.as_deref()).await {
            Ok(s) => s,
            Err(e) => {
                broker.shutdown().await;
                return Err(launch(&e));
            }
        };
        let mut handles: Vec<MockAppHandle> = Vec::new();
        for (config, _) in &self.apps {
            match mockapp::start(&url, config.clone()).await {
                Ok(h) => handles.push(h),
                Err(e) => {
                    for h in handles {
                        h.finish().await;
                    }
                    services.shutdown().await;
                    broker.shutdown().await;
                    return Err(launch(&e));
                }
            }
        }

        // per-app scripts, concurrently
        let runs = handles
            .iter()
            .zip(&self.apps)
            .map(|(h, (_, steps))| h.run_script(steps));
        let mut ok = futures::future::join_all(runs).await.into_iter().all(|passed| passed);

        let mut script_reports = Vec::new();
        if ok {
            for s in &self.script {
                let h = handles.iter().find(|h| h.name() == s.app).expect("validated app name");
                let report = h.step(s.step.clone()).await;
                let failed = report.verdict == Verdict::Fail;
                script_reports.push(BundleStepReport {
                    app: s.app.clone(),
                    step: report,
                });
                if failed {
                    ok = false;
                    break;
                }
            }
        }

        let mut apps = Vec::new();
        for h in handles.into_iter().rev() {
            if let Some(r) = h.finish().await {
                apps.push(r);
            }
        }
        apps.reverse();
        services.shutdown().await;
        let records = broker.records();
        broker.shutdown().await;

        let ok = ok && apps.iter().all(AppReport::passed) && script_reports.iter().all(|s| s.step.verdict == Verdict::Pass);
        let mut report = ScenarioReport {
            scenario: self.name.clone(),
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
            elapsed_ms: started.elapsed().as_millis(),
            apps,
            script: script_reports,
            records,
            expectation: None,
        };
        if let Some(expected) = &self.expected {
            let actual = serde_json::to_value(&report).expect("report serializes");
            if !subset(expected, &actual) {
                report.verdict = Verdict::Fail;
                report.expectation = Some("report does not match the expected report".into());
            }
        }
        Ok(report)
    }
}

/// Loads and runs the bundle at `path`.
pub async fn run(path: impl AsRef<Path>) -> Result<ScenarioReport, ScenarioError> {
    prepare(path)?.run().await
}
