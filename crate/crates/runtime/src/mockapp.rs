//! Runs a [`MockApp`] against a live broker. Each app is an actor task so
//! it keeps answering focus, selection and window traffic while other
//! apps' steps run.

use std::collections::BTreeSet;
use std::time::Duration;

use tokio::sync::{mpsc, oneshot};
use tokio::task::JoinHandle;
use tokio::time::Instant;

use sally_core::mockapp::{AppReport, MockApp, MockDocument, Progress, ScriptStep, StepReport, Verdict};
use sally_core::protocol::{Envelope, MessageType, ModuleInterfaceId, BROKER_ID};

use crate::client::{Client, ClientError};

pub const DEFAULT_STEP_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Clone)]
pub struct MockAppConfig {
    pub name: String,
    pub document: MockDocument,
    pub implements: BTreeSet<ModuleInterfaceId>,
    pub step_timeout: Duration,
}

enum Command {
    Step(ScriptStep, oneshot::Sender<StepReport>),
    Finish(oneshot::Sender<AppReport>),
}

/// Handle to a connected, running mock application.
pub struct MockAppHandle {
    name: String,
    client_id: String,
    commands: mpsc::UnboundedSender<Command>,
    task: JoinHandle<()>,
}

impl MockAppHandle {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn client_id(&self) -> &str {
        &self.client_id
    }

    /// Runs one step to completion (pass, failure or timeout).
    pub async fn step(&self, step: ScriptStep) -> StepReport {
        let (tx, rx) = oneshot::channel();
        let action = step.action().to_string();
        if self.commands.send(Command::Step(step, tx)).is_ok() {
            if let Ok(r) = rx.await {
                return r;
            }
        }
        StepReport {
            index: 0,
            action,
            verdict: Verdict::Fail,
            detail: "connection to the broker was lost".into(),
            observed: Vec::new(),
        }
    }

    /// Runs `steps` in order, stopping at the first failure.
    pub async fn run_script(&self, steps: &[ScriptStep]) -> bool {
        for step in steps {
            if self.step(step.clone()).await.verdict == Verdict::Fail {
                return false;
            }
        }
        true
    }

    /// Disconnects and returns the report of every step run.
    pub async fn finish(self) -> Option<AppReport> {
        let (tx, rx) = oneshot::channel();
        let _ = self.commands.send(Command::Finish(tx));
        let report = rx.await.ok();
        let _ = self.task.await;
        report
    }

    /// Resolves when the connection ends by itself.
    pub async fn wait(&mut self) {
        let _ = (&mut self.task).await;
    }
}

/// Connects, announces the document and starts the actor.
pub async fn start(url: &str, config: MockAppConfig) -> Result<MockAppHandle, ClientError> {
    let mut app = MockApp::new(config.name.clone(), config.document, config.implements);
    let client = Client::connect(url, &app.hello()).await?;
    let welcome = Envelope::new("welcome", BROKER_ID, MessageType::Welcome, client.welcome())
        .map_err(|e| ClientError::Protocol(e.to_string()))?;
    let mut out = client.outbox();
    app.on_envelope(&welcome, &mut out);
    out.send(MessageType::DocOpened, None, None, &app.doc_opened());
    client.send_all(out.drain())?;
    let client_id = client.client_id().to_string();
    tracing::info!(app = %config.name, client = %client_id, "mock app connected");
    let (tx, rx) = mpsc::unbounded_channel();
    let task = tokio::spawn(actor(app, client, rx, config.step_timeout));
    Ok(MockAppHandle {
        name: config.name,
        client_id,
        commands: tx,
        task,
    })
}

struct Active {
    step: ScriptStep,
    index: usize,
    log_start: usize,
    deadline: Instant,
    reply: oneshot::Sender<StepReport>,
}

async fn actor(mut app: MockApp, mut client: Client, mut commands: mpsc::UnboundedReceiver<Command>, timeout: Duration) {
    let mut reports: Vec<StepReport> = Vec::new();
    let mut active: Option<Active> = None;
    let mut connected = true;
    loop {
        // try to finish the active step with the current state
        if let Some(a) = active.as_ref() {
            let outcome = if let ScriptStep::Wait { .. } = a.step {
                (Instant::now() >= a.deadline).then_some((Verdict::Pass, String::new()))
            } else {
                let mut out = client.outbox();
                let p = app.advance(&a.step, &mut out);
                let _ = client.send_all(out.drain());
                match p {
                    Progress::Done => Some((Verdict::Pass, String::new())),
                    Progress::Failed(e) => Some((Verdict::Fail, e)),
                    Progress::Pending(why) if !connected => Some((Verdict::Fail, format!("{why} (disconnected)"))),
                    Progress::Pending(why) if Instant::now() >= a.deadline => {
                        Some((Verdict::Fail, format!("timed out: {why}")))
                    }
                    Progress::Pending(_) => None,
                }
            };
            if let Some((verdict, detail)) = outcome {
                let a = active.take().expect("active");
                let report = StepReport {
                    index: a.index,
                    action: a.step.action().to_string(),
                    verdict,
                    detail,
                    observed: app.log()[a.log_start..].to_vec(),
                };
                if verdict == Verdict::Fail {
                    tracing::warn!(app = app.name(), step = a.index, detail = %report.detail, "step failed");
                }
                reports.push(report.clone());
                let _ = a.reply.send(report);
            }
        }

        let deadline = active.as_ref().map(|a| a.deadline);
        tokio::select! {
            cmd = commands.recv(), if active.is_none() => match cmd {
                Some(Command::Step(step, reply)) => {
                    let wait = match step {
                        ScriptStep::Wait { ms } => Duration::from_millis(ms),
                        _ => timeout,
                    };
                    active = Some(Active {
                        index: reports.len() + 1,
                        log_start: app.log().len(),
                        deadline: Instant::now() + wait,
                        step,
                        reply,
                    });
                }
                Some(Command::Finish(reply)) => {
                    let _ = reply.send(app.report(std::mem::take(&mut reports)));
                    break;
                }
                None => break,
            },
            env = client.recv(), if connected => match env {
                Some(env) => {
                    let mut out = client.outbox();
                    app.on_envelope(&env, &mut out);
                    let _ = client.send_all(out.drain());
                }
                None => connected = false,
            },
            _ = tokio::time::sleep_until(deadline.unwrap_or_else(Instant::now)), if deadline.is_some() => {}
        }
    }
    client.close().await;
}
