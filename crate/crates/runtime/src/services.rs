//! Hosts MKM services: one broker connection per service, all in one
//! process.

use std::sync::Arc;

use tokio::sync::watch;
use tokio::task::JoinHandle;

use sally_core::protocol::messages::{Hello, MenuItems, MenuQuery, Role};
use sally_core::protocol::MessageType;
use sally_core::services::{MkmService, Ontology, ServiceRegistry};

use crate::client::{Client, ClientError};

pub struct ServicesHandle {
    clients: Vec<(String, String)>,
    stop: watch::Sender<bool>,
    tasks: Vec<JoinHandle<()>>,
}

impl ServicesHandle {
    /// (service name, client id) per running service.
    pub fn clients(&self) -> &[(String, String)] {
        &self.clients
    }

    pub async fn shutdown(self) {
        let _ = self.stop.send(true);
        for t in self.tasks {
            let _ = t.await;
        }
    }

    /// Resolves once every service connection has ended.
    pub async fn wait(&mut self) {
        for t in &mut self.tasks {
            let _ = t.await;
        }
    }
}

/// Connects every service in `registry` (or only `names`, when given) and
/// serves them until shutdown.
pub async fn start(
    url: &str,
    ontology: Arc<Ontology>,
    registry: &ServiceRegistry,
    names: Option<&[String]>,
) -> Result<ServicesHandle, ClientError> {
    let (stop, stop_rx) = watch::channel(false);
    let mut handle = ServicesHandle {
        clients: Vec::new(),
        stop,
        tasks: Vec::new(),
    };
    for name in registry.names() {
        if names.is_some_and(|n| !n.iter().any(|x| x == name)) {
            continue;
        }
        let service = registry.create(name, Arc::clone(&ontology)).expect("listed name");
        let hello = Hello {
            role: Role::Service,
            name: service.name().to_string(),
            implements: Vec::new(),
            requires: service.requires().into_iter().collect(),
        };
        let client = match Client::connect(url, &hello).await {
            Ok(c) => c,
            Err(e) => {
                handle.shutdown().await;
                return Err(e);
            }
        };
        tracing::info!(service = name, client = client.client_id(), "service connected");
        handle.clients.push((name.to_string(), client.client_id().to_string()));
        handle.tasks.push(tokio::spawn(serve(service, client, stop_rx.clone())));
    }
    Ok(handle)
}

async fn serve(mut service: Box<dyn MkmService>, mut client: Client, mut stop: watch::Receiver<bool>) {
    loop {
        let env = tokio::select! {
            env = client.recv() => match env {
                Some(env) => env,
                None => break,
            },
            _ = stop.wait_for(|s| *s) => break,
        };
        let mut out = client.outbox();
        if env.kind == MessageType::MenuQuery {
            match env.payload_as::<MenuQuery>() {
                Ok(q) => {
                    let items = MenuItems {
                        menu_id: q.menu_id.clone(),
                        items: service.menu_items(&q),
                    };
                    out.send(MessageType::MenuItems, None, Some(&env.id), &items);
                }
                Err(e) => tracing::warn!(error = %e, "bad menu.query"),
            }
        } else {
            service.handle(&env, &mut out);
        }
        let sent = out.drain();
        if client.send_all(sent).is_err() {
            break;
        }
    }
    client.close().await;
}
