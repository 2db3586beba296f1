use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use sally_core::costmodel::{CostScenario, StrategyRegistry};
use sally_core::mockapp::{load_script, MockDocument};
use sally_core::protocol::{standard_modules, ModuleInterfaceId};
use sally_core::registry::load_module_file;
use sally_core::services::{Ontology, ServiceRegistry};
use sally_runtime::broker::{self, BrokerConfig, DEFAULT_FLUSH_INTERVAL, DEFAULT_MENU_TIMEOUT};
use sally_runtime::mockapp::{MockAppConfig, DEFAULT_STEP_TIMEOUT};
use sally_runtime::{scenario, services};

/// Sally: connects document applications to knowledge services.
#[derive(Parser)]
#[command(name = "sally", version)]
struct Cli {
    /// Log filter, e.g. `info` or `sally_runtime=debug`. Logs are JSON lines on stderr.
    #[arg(long, global = true, default_value = "info", env = "SALLY_LOG")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the middleware.
    Broker {
        #[command(subcommand)]
        action: BrokerAction,
    },
    /// Run the bundled MKM services against a broker.
    Services {
        #[command(subcommand)]
        action: ServicesAction,
    },
    /// Run a headless application with a synthetic document.
    Mockapp {
        #[command(subcommand)]
        action: MockappAction,
    },
    /// Launch a scenario bundle and report.
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
    /// Evaluate integration cost strategies.
    Cost {
        #[command(subcommand)]
        action: CostAction,
    },
}

#[derive(Subcommand)]
enum BrokerAction {
    Serve(ServeArgs),
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// 0 picks a free port; the bound address is logged.
    #[arg(long, default_value_t = 8765)]
    port: u16,
    /// JSON list of module descriptors; the standard set when omitted.
    #[arg(long)]
    modules: Option<PathBuf>,
    /// Semantic store file. Records are kept in memory when omitted.
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MENU_TIMEOUT.as_millis() as u64)]
    menu_timeout_ms: u64,
    #[arg(long, default_value_t = DEFAULT_FLUSH_INTERVAL.as_millis() as u64)]
    flush_interval_ms: u64,
    /// Static directory served next to the WebSocket endpoint.
    #[arg(long)]
    ui: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ServicesAction {
    Run {
        #[arg(long)]
        broker: String,
        #[arg(long)]
        ontology: PathBuf,
        /// Comma separated service names; all when omitted.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
    },
}

#[derive(Subcommand)]
enum MockappAction {
    Run(MockappArgs),
}

#[derive(Args)]
struct MockappArgs {
    #[arg(long)]
    broker: String,
    #[arg(long)]
    doc: PathBuf,
    /// Comma separated module ids, e.g. `core.selection/1,core.menu/1`.
    #[arg(long, value_delimiter = ',', required = true)]
    implements: Vec<ModuleInterfaceId>,
    /// Runs the script and exits; without one the app stays up until interrupted.
    #[arg(long)]
    script: Option<PathBuf>,
    #[arg(long)]
    name: Option<String>,
    #[arg(long, default_value_t = DEFAULT_STEP_TIMEOUT.as_millis() as u64)]
    step_timeout_ms: u64,
}

#[derive(Subcommand)]
enum ScenarioAction {
    Run { path: PathBuf },
}

#[derive(Subcommand)]
enum CostAction {
    Eval {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        json: bool,
        /// Comma separated strategy names; all applicable when omitted.
        #[arg(long, value_delimiter = ',')]
        strategy: Vec<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let filter = EnvFilter::try_new(&cli.log_level).unwrap_or_else(|_| EnvFilter::new("info"));
    tracing_subscriber::fmt()
        .json()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();

    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("cannot start runtime: {e}");
            return ExitCode::from(2);
        }
    };
    let code = runtime.block_on(async {
        match cli.command {
            Command::Broker { action: BrokerAction::Serve(args) } => serve(args).await,
            Command::Services { action: ServicesAction::Run { broker, ontology, only } } => {
                run_services(&broker, &ontology, only).await
            }
            Command::Mockapp { action: MockappAction::Run(args) } => run_mockapp(args).await,
            Command::Scenario { action: ScenarioAction::Run { path } } => run_scenario(&path).await,
            Command::Cost { action: CostAction::Eval { scenario, json, strategy } } => cost_eval(&scenario, json, &strategy),
        }
    });
    match code {
        Ok(c) => ExitCode::from(c),
        Err(e) => {
            tracing::error!(error = format!("{e:#}"), "failed");
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Writes a line to stdout; a closed pipe is not an error.
fn emit(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        let mut term = match signal(SignalKind::terminate()) {
            Ok(s) => s,
            Err(_) => {
                let _ = tokio::signal::ctrl_c().await;
                return;
            }
        };
        tokio::select! {
            _ = tokio::signal::ctrl_c() => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
}

async fn serve(args: ServeArgs) -> Result<u8> {
    let modules = match &args.modules {
        Some(p) => load_module_file(p)?,
        None => standard_modules(),
    };
    let config = BrokerConfig {
        host: args.host,
        port: args.port,
        modules,
        store: args.store,
        menu_timeout: Duration::from_millis(args.menu_timeout_ms),
        flush_interval: Duration::from_millis(args.flush_interval_ms),
        ui_dir: args.ui,
    };
    let mut handle = broker::start(config).await?;
    tokio::select! {
        _ = shutdown_signal() => {
            tracing::info!("shutting down");
            handle.shutdown().await;
        }
        _ = handle.wait() => {}
    }
    Ok(0)
}

async fn run_services(url: &str, ontology: &Path, only: Vec<String>) -> Result<u8> {
    let ontology = Ontology::load(ontology)?;
    let registry = ServiceRegistry::standard();
    if let Some(bad) = only.iter().find(|n| !registry.names().contains(&n.as_str())) {
        anyhow::bail!("unknown service {bad:?}; known: {}", registry.names().join(", "));
    }
    let names = (!only.is_empty()).then_some(only);
    let mut handle = services::start(url, Arc::new(ontology), &registry, names.as_deref()).await?;
    tokio::select! {
        _ = shutdown_signal() => handle.shutdown().await,
        _ = handle.wait() => tracing::info!("broker closed the connections"),
    }
    Ok(0)
}

async fn run_mockapp(args: MockappArgs) -> Result<u8> {
    let document = MockDocument::load(&args.doc)?;
    let steps = match &args.script {
        Some(p) => Some(load_script(p)?),
        None => None,
    };
    let name = args
        .name
        .or_else(|| document.name().map(str::to_string))
        .or_else(|| args.doc.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "mockapp".into());
    let config = MockAppConfig {
        name,
        document,
        implements: args.implements.into_iter().collect(),
        step_timeout: Duration::from_millis(args.step_timeout_ms),
    };
    let mut handle = sally_runtime::mockapp::start(&args.broker, config).await?;
    match steps {
        Some(steps) => {
            handle.run_script(&steps).await;
        }
        None => {
            tokio::select! {
                _ = shutdown_signal() => {}
                _ = handle.wait() => {}
            }
        }
    }
    let report = handle.finish().await.context("mock app ended without a report")?;
    emit(&serde_json::to_string_pretty(&report)?);
    Ok(if report.passed() { 0 } else { 1 })
}

async fn run_scenario(path: &Path) -> Result<u8> {
    match scenario::run(path).await {
        Ok(report) => {
            emit(&serde_json::to_string_pretty(&report)?);
            Ok(report.exit_code() as u8)
        }
        Err(e) => {
            tracing::error!(error = %e, "scenario did not start");
            eprintln!("error: {e}");
            Ok(e.exit_code() as u8)
        }
    }
}

fn cost_eval(path: &Path, json: bool, only: &[String]) -> Result<u8> {
    let scenario = CostScenario::load(path)?;
    let comparison = StrategyRegistry::standard().compare(&scenario, only)?;
    if json {
        emit(&serde_json::to_string_pretty(&comparison)?);
    } else {
        emit(comparison.render_table().trim_end());
    }
    Ok(0)
}
