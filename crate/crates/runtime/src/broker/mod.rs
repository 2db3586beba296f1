//! The WebSocket broker: handshake, routing under the integration matrix,
//! menu aggregation and the hosted semantic store.

mod flusher;
mod hub;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use tokio::sync::{mpsc, watch, Notify};
use tokio::task::JoinHandle;
use tower_http::services::ServeDir;

use sally_core::adm::{AdmError, SemanticRecord, SemanticStore};
use sally_core::protocol::standard_modules;
use sally_core::registry::{ModuleDescriptor, Registry, RegistryError};

pub use hub::{Hub, Outbound};

pub const DEFAULT_MENU_TIMEOUT: Duration = Duration::from_millis(2000);
pub const DEFAULT_FLUSH_INTERVAL: Duration = Duration::from_millis(250);

/// Path of the WebSocket endpoint.
pub const WS_PATH: &str = "/ws";

#[derive(Debug, thiserror::Error)]
pub enum BrokerError {
    #[error("cannot bind {addr}: {reason}")]
    Bind { addr: String, reason: String },
    #[error(transparent)]
    Modules(#[from] RegistryError),
    #[error(transparent)]
    Store(#[from] AdmError),
    #[error("ui directory {0} does not exist")]
    MissingUi(PathBuf),
}

#[derive(Debug, Clone)]
pub struct BrokerConfig {
    pub host: String,
    /// 0 picks a free port.
    pub port: u16,
    pub modules: Vec<ModuleDescriptor>,
    /// `None` keeps records in memory only.
    pub store: Option<PathBuf>,
    pub menu_timeout: Duration,
    pub flush_interval: Duration,
    pub ui_dir: Option<PathBuf>,
}

impl Default for BrokerConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 0,
            modules: standard_modules(),
            store: None,
            menu_timeout: DEFAULT_MENU_TIMEOUT,
            flush_interval: DEFAULT_FLUSH_INTERVAL,
            ui_dir: None,
        }
    }
}

/// A running broker.
pub struct BrokerHandle {
    addr: SocketAddr,
    hub: Arc<Hub>,
    stop: watch::Sender<bool>,
    server: JoinHandle<()>,
    flusher: JoinHandle<()>,
}

impl BrokerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn ws_url(&self) -> String {
        format!("ws://{}{WS_PATH}", self.addr)
    }

    pub fn hub(&self) -> &Arc<Hub> {
        &self.hub
    }

    pub fn records(&self) -> Vec<SemanticRecord> {
        self.hub.records()
    }

    /// Closes every connection, stops accepting, and writes the store a
    /// last time.
    pub async fn shutdown(self) {
        self.hub.close_all();
        let _ = self.stop.send(true);
        let _ = self.server.await;
        let _ = self.flusher.await;
    }

    /// Resolves when the server stops by itself (it normally does not).
    pub async fn wait(&mut self) {
        let _ = (&mut self.server).await;
    }
}

pub async fn start(config: BrokerConfig) -> Result<BrokerHandle, BrokerError> {
    let registry = Registry::with_modules(config.modules.clone())?;
    let store = match &config.store {
        Some(path) => {
            let (store, report) = SemanticStore::open(path)?;
            tracing::info!(path = %path.display(), loaded = report.loaded, skipped = report.skipped, "store opened");
            store
        }
        None => SemanticStore::in_memory(),
    };
    let store = Arc::new(store);
    if let Some(ui) = &config.ui_dir {
        if !ui.is_dir() {
            return Err(BrokerError::MissingUi(ui.clone()));
        }
    }

    let bind = format!("{}:{}", config.host, config.port);
    let listener = tokio::net::TcpListener::bind(&bind).await.map_err(|e| BrokerError::Bind {
        addr: bind.clone(),
        reason: e.to_string(),
    })?;
    let addr = listener.local_addr().map_err(|e| BrokerError::Bind {
        addr: bind,
        reason: e.to_string(),
    })?;

    let dirty = Arc::new(Notify::new());
    let (durable_tx, durable_rx) = watch::channel(store.flushed_generation());
    let (stop, stop_rx) = watch::channel(false);
    let hub = Arc::new(Hub::new(registry, Arc::clone(&store), config.menu_timeout, Arc::clone(&dirty), durable_rx));

    let flusher = tokio::spawn(flusher::run(store, dirty, durable_tx, config.flush_interval, stop_rx.clone()));

    let mut router = Router::new().route(WS_PATH, get(upgrade)).with_state(Arc::clone(&hub));
    if let Some(ui) = &config.ui_dir {
        router = router.fallback_service(ServeDir::new(ui));
    }
    let mut shutdown = stop_rx;
    let server = tokio::spawn(async move {
        let result = axum::serve(listener, router)
            .with_graceful_shutdown(async move {
                let _ = shutdown.wait_for(|s| *s).await;
            })
            .await;
        if let Err(e) = result {
            tracing::error!(error = %e, "server stopped");
        }
    });
    tracing::info!(%addr, path = WS_PATH, "listening");
    Ok(BrokerHandle {
        addr,
        hub,
        stop,
        server,
        flusher,
    })
}

async fn upgrade(ws: WebSocketUpgrade, State(hub): State<Arc<Hub>>) -> Response {
    ws.on_upgrade(move |socket| connection(hub, socket))
}

async fn connection(hub: Arc<Hub>, socket: WebSocket) {
    let (mut sink, mut stream) = socket.split();
    let (tx, mut rx) = mpsc::unbounded_channel::<Outbound>();
    let writer = tokio::spawn(async move {
        while let Some(out) = rx.recv().await {
            match out {
                Outbound::Text(text) => {
                    if sink.send(Message::Text(text.into())).await.is_err() {
                        break;
                    }
                }
                Outbound::Close => {
                    let _ = sink.send(Message::Close(None)).await;
                    break;
                }
            }
        }
    });

    let mut client: Option<String> = None;
    while let Some(Ok(msg)) = stream.next().await {
        let text = match msg {
            Message::Text(t) => t.to_string(),
            Message::Binary(b) => String::from_utf8_lossy(&b).into_owned(),
            Message::Close(_) => break,
            _ => continue,
        };
        match &client {
            None => match hub.handshake(&text, tx.clone()) {
                Some(id) => client = Some(id),
                None => break,
            },
            Some(id) => hub.on_frame(id, &text),
        }
    }
    if let Some(id) = &client {
        hub.disconnect(id);
    }
    drop(tx);
    let _ = writer.await;
}
