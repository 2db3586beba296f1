use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use serde::Serialize;
use serde_json::Value;
use tokio::sync::{mpsc, watch, Notify};

use sally_core::adm::{RecordFilter, SemanticRecord, SemanticStore};
use sally_core::protocol::messages::{
    DocClosed, DocOpened, ErrorPayload, FocusRequest, Hello, MenuInvoke, MenuItemSpec, MenuItems,
    MenuQuery, MenuRequest, MenuResponse, ObjectDeleted, Peer, RecordEntry, RecordOwner, Reject,
    RejectReason, Role, StorageDelete, StorageGet, StorageList, StoragePut, StorageRecords,
    Welcome, WindowClose, WindowEvent,
};
use sally_core::protocol::{
    decode_envelope, encode_envelope_text, mid, ContextMenuItem, Envelope, ErrorCode, IdGen,
    MessageType, ModuleInterfaceId, ProtocolError, WindowSpec, BROKER_ID, CORE_FOCUS, CORE_MENU,
    CORE_SELECTION, CORE_STORAGE, PROTOCOL_VERSION,
};
use sally_core::registry::{ApplicationRegistration, Registry, RegistryError, ServiceRegistration};

/// What a connection task writes to its socket.
#[derive(Debug, Clone, PartialEq)]
pub enum Outbound {
    Text(String),
    Close,
}

pub type Tx = mpsc::UnboundedSender<Outbound>;

struct Session {
    role: Role,
    name: String,
    tx: Tx,
}

struct PendingMenu {
    app: String,
    request_id: String,
    awaiting: BTreeSet<String>,
    /// (service name, service id) -> items, in the order the service sent them.
    collected: BTreeMap<(String, String), Vec<MenuItemSpec>>,
}

#[derive(Default)]
struct Inner {
    registry: Registry,
    sessions: BTreeMap<String, Session>,
    next_client: u64,
    departed: HashSet<String>,
    /// doc uri -> applications that have it open
    docs: BTreeMap<String, BTreeSet<String>>,
    menus: HashMap<String, PendingMenu>,
    /// (app, service, windowId) for every open window
    windows: HashSet<(String, String, String)>,
    /// request id -> (requester, recipient) for relayed requests that expect a reply
    inflight: HashMap<String, (String, String)>,
    announced: BTreeMap<String, Vec<Peer>>,
}

/// Broker state and routing rules. Every decision is made under one lock;
/// sends go to per-connection unbounded queues, so per-sender FIFO order is
/// the order in which frames are processed here.
pub struct Hub {
    inner: Mutex<Inner>,
    store: Arc<SemanticStore>,
    ids: IdGen,
    menu_timeout: Duration,
    dirty: Arc<Notify>,
    durable: watch::Receiver<u64>,
}

type Refusal = (ErrorCode, String);

fn refuse<T>(code: ErrorCode, message: impl Into<String>) -> Result<T, Refusal> {
    Err((code, message.into()))
}

fn send_env(tx: &Tx, env: &Envelope) -> bool {
    match encode_envelope_text(env) {
        Ok(text) => tx.send(Outbound::Text(text)).is_ok(),
        Err(e) => {
            tracing::error!(error = %e, kind = %env.kind, "cannot encode envelope");
            false
        }
    }
}

fn raw_id(text: &str) -> Option<String> {
    serde_json::from_str::<Value>(text)
        .ok()?
        .get("id")?
        .as_str()
        .map(str::to_string)
}

impl Hub {
    pub fn new(
        registry: Registry,
        store: Arc<SemanticStore>,
        menu_timeout: Duration,
        dirty: Arc<Notify>,
        durable: watch::Receiver<u64>,
    ) -> Self {
        Self {
            inner: Mutex::new(Inner {
                registry,
                ..Default::default()
            }),
            store,
            ids: IdGen::new(BROKER_ID),
            menu_timeout,
            dirty,
            durable,
        }
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().expect("broker state lock")
    }

    pub fn store(&self) -> &Arc<SemanticStore> {
        &self.store
    }

    fn envelope<P: Serialize>(&self, kind: MessageType, to: Option<&str>, corr: Option<&str>, payload: &P) -> Envelope {
        let mut e = Envelope::new(self.ids.next_id(), BROKER_ID, kind, payload)
            .unwrap_or_else(|err| panic!("broker built an invalid {kind}: {err}"));
        e.to = to.map(str::to_string);
        e.corr = corr.map(str::to_string);
        e
    }

    fn send_error(&self, tx: &Tx, to: &str, corr: Option<&str>, code: ErrorCode, message: &str) {
        tracing::debug!(client = to, %code, message, "refused");
        let env = self.envelope(MessageType::Error, Some(to), corr, &ErrorPayload::new(code, message));
        send_env(tx, &env);
    }

    fn reject(&self, tx: &Tx, reason: RejectReason, detail: String) -> Option<String> {
        tracing::info!(?reason, detail, "handshake rejected");
        let env = self.envelope(MessageType::Reject, None, None, &Reject { reason, detail });
        send_env(tx, &env);
        let _ = tx.send(Outbound::Close);
        None
    }

    /// Handles the first frame of a connection. Returns the assigned client
    /// id, or `None` after sending a reject.
    pub fn handshake(&self, text: &str, tx: Tx) -> Option<String> {
        if let Ok(Value::Object(obj)) = serde_json::from_str::<Value>(text) {
            if let Some(v) = obj.get("v").filter(|v| v.as_str() != Some(PROTOCOL_VERSION)) {
                return self.reject(&tx, RejectReason::Version, format!("protocol version {v} is not {PROTOCOL_VERSION}"));
            }
        }
        let env = match decode_envelope(text.as_bytes()) {
            Ok(env) if env.kind == MessageType::Hello => env,
            Ok(env) => return self.reject(&tx, RejectReason::Malformed, format!("expected sally.hello, got {}", env.kind)),
            Err(e) => return self.reject(&tx, RejectReason::Malformed, e.to_string()),
        };
        let hello: Hello = match env.payload_as() {
            Ok(h) => h,
            Err(e) => return self.reject(&tx, RejectReason::Malformed, e.to_string()),
        };

        let mut inner = self.lock();
        inner.next_client += 1;
        let client_id = match hello.role {
            Role::Application => format!("app-{}", inner.next_client),
            Role::Service => format!("svc-{}", inner.next_client),
        };
        let registered = match hello.role {
            Role::Application => inner.registry.register_application(ApplicationRegistration {
                client_id: client_id.clone(),
                name: hello.name.clone(),
                implements: hello.implements.iter().cloned().collect(),
            }),
            Role::Service => inner.registry.register_service(ServiceRegistration {
                client_id: client_id.clone(),
                name: hello.name.clone(),
                requires: hello.requires.iter().cloned().collect(),
            }),
        };
        if let Err(e) = registered {
            drop(inner);
            let reason = match e {
                RegistryError::UnknownModule(_) => RejectReason::UnknownModule,
                _ => RejectReason::Malformed,
            };
            return self.reject(&tx, reason, e.to_string());
        }
        inner.sessions.insert(
            client_id.clone(),
            Session {
                role: hello.role,
                name: hello.name.clone(),
                tx: tx.clone(),
            },
        );
        let integrations = self.peers_of(&inner, &client_id);
        let effective = self.effective(&inner, &client_id);
        let welcome = Welcome {
            client_id: client_id.clone(),
            role: hello.role,
            integrations: integrations.clone(),
            effective,
            update: false,
        };
        send_env(&tx, &self.envelope(MessageType::Welcome, Some(&client_id), Some(&env.id), &welcome));
        inner.announced.insert(client_id.clone(), integrations);
        self.announce_changes(&mut inner);
        tracing::info!(client = %client_id, name = %hello.name, role = %hello.role, "client registered");
        Some(client_id)
    }

    fn peers_of(&self, inner: &Inner, client: &str) -> Vec<Peer> {
        let matrix = inner.registry.integration_matrix();
        let ids = match inner.sessions.get(client).map(|s| s.role) {
            Some(Role::Application) => matrix.services_for(client),
            Some(Role::Service) => matrix.apps_for(client),
            None => Vec::new(),
        };
        ids.into_iter()
            .filter_map(|id| {
                inner.sessions.get(&id).map(|s| Peer {
                    client_id: id.clone(),
                    name: s.name.clone(),
                })
            })
            .collect()
    }

    fn effective(&self, inner: &Inner, client: &str) -> Vec<ModuleInterfaceId> {
        if let Some(app) = inner.registry.application(client) {
            inner.registry.effective_capabilities(app).into_iter().collect()
        } else if let Some(svc) = inner.registry.service(client) {
            svc.requires.iter().cloned().collect()
        } else {
            Vec::new()
        }
    }

    fn app_has(&self, inner: &Inner, app: &str, module: &str) -> bool {
        inner
            .registry
            .application(app)
            .is_some_and(|a| inner.registry.effective_capabilities(a).contains(&mid(module)))
    }

    /// Re-sends a welcome (with `update` set) to every client whose set of
    /// integration partners changed.
    fn announce_changes(&self, inner: &mut Inner) {
        let ids: Vec<String> = inner.sessions.keys().cloned().collect();
        for id in ids {
            let now = self.peers_of(inner, &id);
            if inner.announced.get(&id) == Some(&now) {
                continue;
            }
            let session = &inner.sessions[&id];
            let welcome = Welcome {
                client_id: id.clone(),
                role: session.role,
                integrations: now.clone(),
                effective: self.effective(inner, &id),
                update: true,
            };
            send_env(&session.tx, &self.envelope(MessageType::Welcome, Some(&id), None, &welcome));
            inner.announced.insert(id, now);
        }
    }

    /// Handles one frame from a registered client.
    pub fn on_frame(self: &Arc<Self>, client: &str, text: &str) {
        let Some(tx) = self.lock().sessions.get(client).map(|s| s.tx.clone()) else {
            return;
        };
        let mut env = match decode_envelope(text.as_bytes()) {
            Ok(env) => env,
            Err(e) => {
                let code = match e {
                    ProtocolError::UnknownMessageType(_) => ErrorCode::UnknownMessageType,
                    _ => ErrorCode::Malformed,
                };
                self.send_error(&tx, client, raw_id(text).as_deref(), code, &e.to_string());
                return;
            }
        };
        if env.v != PROTOCOL_VERSION {
            let msg = format!("protocol version {} is not {PROTOCOL_VERSION}", env.v);
            self.send_error(&tx, client, Some(&env.id), ErrorCode::Malformed, &msg);
            return;
        }
        env.from = client.to_string();
        let result = match env.to.as_deref() {
            Some(to) if to != BROKER_ID => self.relay(env.clone(), to),
            _ => self.handle(&env, &tx),
        };
        if let Err((code, message)) = result {
            self.send_error(&tx, client, Some(&env.id), code, &message);
        }
    }

    fn relay(&self, mut env: Envelope, to: &str) -> Result<(), Refusal> {
        let mut inner = self.lock();
        let Some(recipient) = inner.sessions.get(to) else {
            return if inner.departed.contains(to) {
                refuse(ErrorCode::Gone, format!("{to} has disconnected"))
            } else {
                refuse(ErrorCode::UnknownClient, format!("no client {to}"))
            };
        };
        let sender_role = inner.sessions[&env.from].role;
        if sender_role == recipient.role {
            return refuse(ErrorCode::NotIntegrated, format!("{} and {to} are both {sender_role}s", env.from));
        }
        let (service, app) = match sender_role {
            Role::Service => (env.from.clone(), to.to_string()),
            Role::Application => (to.to_string(), env.from.clone()),
        };
        if !inner.registry.integration_matrix().is_integrated(&service, &app) {
            return refuse(ErrorCode::NotIntegrated, format!("{service} is not integrated with {app}"));
        }
        if let Some(module) = env.kind.module() {
            if !self.app_has(&inner, &app, module) {
                return refuse(ErrorCode::NotIntegrated, format!("{app} lacks module {module}"));
            }
        }
        match env.kind {
            MessageType::FocusRequest => {
                let f: FocusRequest = env.payload_as().map_err(|e| (ErrorCode::Malformed, e.to_string()))?;
                if f.select.is_some() && !self.app_has(&inner, &app, CORE_SELECTION) {
                    return refuse(ErrorCode::NotIntegrated, format!("{app} lacks module {CORE_SELECTION}"));
                }
            }
            MessageType::WindowOpen if sender_role == Role::Service => {
                let spec: WindowSpec = env.payload_as().map_err(|e| (ErrorCode::Malformed, e.to_string()))?;
                if !inner.windows.insert((app.clone(), service.clone(), spec.window_id.clone())) {
                    return refuse(ErrorCode::DuplicateWindow, format!("window {} is already open", spec.window_id));
                }
            }
            MessageType::WindowClose if sender_role == Role::Service => {
                if let Ok(c) = env.payload_as::<WindowClose>() {
                    inner.windows.remove(&(app.clone(), service.clone(), c.window_id));
                }
            }
            MessageType::WindowEvent if sender_role == Role::Application => {
                if let Ok(ev) = env.payload_as::<WindowEvent>() {
                    if ev.event == "closed" {
                        inner.windows.remove(&(app.clone(), service.clone(), ev.window_id));
                    }
                }
            }
            MessageType::MenuInvoke => {
                let mut invoke: MenuInvoke = env.payload_as().map_err(|e| (ErrorCode::Malformed, e.to_string()))?;
                invoke.records = self.store.records_for(&invoke.selection);
                env.payload = serde_json::to_value(&invoke).expect("menu.invoke serializes");
            }
            _ => {}
        }
        if matches!(env.kind, MessageType::FocusRequest | MessageType::SelectionSet) {
            inner.inflight.insert(env.id.clone(), (env.from.clone(), to.to_string()));
        }
        if let Some(corr) = &env.corr {
            inner.inflight.remove(corr);
        }
        let recipient = &inner.sessions[to];
        if !send_env(&recipient.tx, &env) {
            return refuse(ErrorCode::Gone, format!("{to} has disconnected"));
        }
        Ok(())
    }

    fn handle(self: &Arc<Self>, env: &Envelope, tx: &Tx) -> Result<(), Refusal> {
        let role = self.lock().sessions.get(&env.from).map(|s| s.role);
        let bad = |e: ProtocolError| (ErrorCode::Malformed, e.to_string());
        match (env.kind, role) {
            (MessageType::Hello, _) => refuse(ErrorCode::Malformed, "already registered"),
            (MessageType::MenuRequest, Some(Role::Application)) => {
                let req: MenuRequest = env.payload_as().map_err(bad)?;
                self.start_menu(env, req)
            }
            (MessageType::MenuItems, Some(Role::Service)) => {
                let items: MenuItems = env.payload_as().map_err(bad)?;
                self.collect_menu(&env.from, items);
                Ok(())
            }
            (MessageType::SelectionChanged, Some(Role::Application)) => Ok(()),
            (MessageType::DocOpened, Some(Role::Application)) => {
                let d: DocOpened = env.payload_as().map_err(bad)?;
                self.lock().docs.entry(d.doc).or_default().insert(env.from.clone());
                Ok(())
            }
            (MessageType::DocClosed, Some(Role::Application)) => {
                let d: DocClosed = env.payload_as().map_err(bad)?;
                let mut inner = self.lock();
                if let Some(apps) = inner.docs.get_mut(&d.doc) {
                    apps.remove(&env.from);
                    if apps.is_empty() {
                        inner.docs.remove(&d.doc);
                    }
                }
                Ok(())
            }
            (MessageType::ObjectDeleted, Some(Role::Application)) => {
                let d: ObjectDeleted = env.payload_as().map_err(bad)?;
                self.check_doc_access(&env.from, &d.object.doc)?;
                let (purged, generation) = self.store.on_object_deleted(&d.object);
                let reply = StorageRecords {
                    entries: Vec::new(),
                    purged: Some(purged),
                };
                self.reply_when_durable(tx, env, purged > 0, generation, reply);
                Ok(())
            }
            (MessageType::StoragePut, Some(_)) => {
                let put: StoragePut = env.payload_as().map_err(bad)?;
                self.check_doc_access(&env.from, &put.record.doc)?;
                let (doc, object, key) = (put.record.doc.clone(), put.record.object.clone(), put.record.key.clone());
                let generation = self
                    .store
                    .put(put.record)
                    .map_err(|e| (ErrorCode::InvalidRecord, e.to_string()))?;
                let stored = self.store.get(&doc, object.as_ref(), &key);
                let reply = StorageRecords {
                    entries: stored.into_iter().map(|record| RecordEntry { record, app: None }).collect(),
                    purged: None,
                };
                self.reply_when_durable(tx, env, true, generation, reply);
                Ok(())
            }
            (MessageType::StorageGet, Some(_)) => {
                let get: StorageGet = env.payload_as().map_err(bad)?;
                self.check_doc_access(&env.from, &get.doc)?;
                let found = self.store.get(&get.doc, get.object.as_ref(), &get.key);
                let reply = StorageRecords {
                    entries: found.into_iter().map(|record| RecordEntry { record, app: None }).collect(),
                    purged: None,
                };
                send_env(tx, &self.envelope(MessageType::StorageRecords, Some(&env.from), Some(&env.id), &reply));
                Ok(())
            }
            (MessageType::StorageDelete, Some(_)) => {
                let del: StorageDelete = env.payload_as().map_err(bad)?;
                self.check_doc_access(&env.from, &del.doc)?;
                let (removed, generation) = self.store.delete(&del.doc, del.object.as_ref(), &del.key);
                let changed = removed.is_some();
                let reply = StorageRecords {
                    entries: removed.into_iter().map(|record| RecordEntry { record, app: None }).collect(),
                    purged: None,
                };
                self.reply_when_durable(tx, env, changed, generation, reply);
                Ok(())
            }
            (MessageType::StorageList, Some(_)) => {
                let list: StorageList = env.payload_as().map_err(bad)?;
                let reply = self.list(&env.from, list)?;
                send_env(tx, &self.envelope(MessageType::StorageRecords, Some(&env.from), Some(&env.id), &reply));
                Ok(())
            }
            (kind, _) => refuse(ErrorCode::NotImplemented, format!("the broker does not accept {kind} from {}", env.from)),
        }
    }

    /// Applications that may store semantic information in `doc` on behalf
    /// of `client`: the client itself if it is an application, otherwise
    /// the integrated applications. Only applications with the document
    /// open and storage among their capabilities count.
    fn storage_apps(&self, inner: &Inner, client: &str) -> Vec<String> {
        let candidates = match inner.sessions.get(client).map(|s| s.role) {
            Some(Role::Application) => vec![client.to_string()],
            Some(Role::Service) => inner.registry.integration_matrix().apps_for(client),
            None => Vec::new(),
        };
        candidates
            .into_iter()
            .filter(|a| self.app_has(inner, a, CORE_STORAGE))
            .collect()
    }

    fn check_doc_access(&self, client: &str, doc: &str) -> Result<(), Refusal> {
        let inner = self.lock();
        let apps = self.storage_apps(&inner, client);
        let open = inner.docs.get(doc);
        if apps.iter().any(|a| open.is_some_and(|o| o.contains(a))) {
            Ok(())
        } else {
            refuse(
                ErrorCode::NotIntegrated,
                format!("no application integrated with {client} has {doc} open with {CORE_STORAGE}"),
            )
        }
    }

    fn list(&self, client: &str, list: StorageList) -> Result<StorageRecords, Refusal> {
        let inner = self.lock();
        let apps: BTreeSet<String> = self.storage_apps(&inner, client).into_iter().collect();
        if apps.is_empty() {
            return refuse(ErrorCode::NotIntegrated, format!("{client} has no storage-capable application"));
        }
        // doc -> owner, the visible opener with the smallest name
        let mut owners: BTreeMap<&str, RecordOwner> = BTreeMap::new();
        for (doc, openers) in &inner.docs {
            let owner = openers
                .iter()
                .filter(|a| apps.contains(*a))
                .filter_map(|a| inner.sessions.get(a).map(|s| (s.name.as_str(), a.as_str())))
                .min();
            if let Some((name, id)) = owner {
                owners.insert(
                    doc,
                    RecordOwner {
                        client_id: id.to_string(),
                        name: name.to_string(),
                        can_focus: self.app_has(&inner, id, CORE_FOCUS) && self.app_has(&inner, id, CORE_SELECTION),
                    },
                );
            }
        }
        let filter = RecordFilter {
            doc: list.doc,
            key: list.key,
            value: list.value,
        };
        let entries = self
            .store
            .list(&filter)
            .into_iter()
            .filter_map(|record| {
                let owner = owners.get(record.doc.as_str())?.clone();
                Some(RecordEntry {
                    record,
                    app: Some(owner),
                })
            })
            .collect();
        Ok(StorageRecords { entries, purged: None })
    }

    /// Sends `reply` once generation `generation` is on disk. Replies that
    /// changed nothing go out immediately.
    fn reply_when_durable(&self, tx: &Tx, env: &Envelope, changed: bool, generation: u64, reply: StorageRecords) {
        let out = self.envelope(MessageType::StorageRecords, Some(&env.from), Some(&env.id), &reply);
        if !changed {
            send_env(tx, &out);
            return;
        }
        self.dirty.notify_one();
        let mut durable = self.durable.clone();
        let tx = tx.clone();
        tokio::spawn(async move {
            if durable.wait_for(|g| *g >= generation).await.is_ok() {
                send_env(&tx, &out);
            }
        });
    }

    fn start_menu(self: &Arc<Self>, env: &Envelope, req: MenuRequest) -> Result<(), Refusal> {
        let mut inner = self.lock();
        let app = env.from.clone();
        if !self.app_has(&inner, &app, CORE_MENU) {
            return refuse(ErrorCode::NotIntegrated, format!("{app} lacks module {CORE_MENU}"));
        }
        let menu_id = self.ids.next_id();
        let services: Vec<String> = inner
            .registry
            .integration_matrix()
            .services_for(&app)
            .into_iter()
            .filter(|s| inner.sessions.contains_key(s))
            .collect();
        let pending = PendingMenu {
            app: app.clone(),
            request_id: env.id.clone(),
            awaiting: services.iter().cloned().collect(),
            collected: BTreeMap::new(),
        };
        if services.is_empty() {
            self.finish_menu_locked(&inner, &menu_id, pending);
            return Ok(());
        }
        let query = MenuQuery {
            menu_id: menu_id.clone(),
            app: app.clone(),
            app_name: inner.sessions[&app].name.clone(),
            records: self.store.records_for(&req.selection),
            selection: req.selection,
            capabilities: self.effective(&inner, &app),
        };
        for s in &services {
            let q = self.envelope(MessageType::MenuQuery, Some(s), None, &query);
            send_env(&inner.sessions[s].tx, &q);
        }
        inner.menus.insert(menu_id.clone(), pending);
        drop(inner);
        let hub = Arc::clone(self);
        let timeout = self.menu_timeout;
        tokio::spawn(async move {
            tokio::time::sleep(timeout).await;
            let mut inner = hub.lock();
            if let Some(p) = inner.menus.remove(&menu_id) {
                tracing::debug!(menu = %menu_id, late = ?p.awaiting, "menu timed out");
                hub.finish_menu_locked(&inner, &menu_id, p);
            }
        });
        Ok(())
    }

    fn collect_menu(&self, service: &str, items: MenuItems) {
        let mut inner = self.lock();
        let name = inner.sessions.get(service).map(|s| s.name.clone()).unwrap_or_default();
        let Some(p) = inner.menus.get_mut(&items.menu_id) else {
            return; // late or unknown: dropped
        };
        if !p.awaiting.remove(service) {
            return;
        }
        p.collected.insert((name, service.to_string()), items.items);
        if p.awaiting.is_empty() {
            let p = inner.menus.remove(&items.menu_id).expect("present");
            self.finish_menu_locked(&inner, &items.menu_id, p);
        }
    }

    fn finish_menu_locked(&self, inner: &Inner, menu_id: &str, p: PendingMenu) {
        let Some(session) = inner.sessions.get(&p.app) else { return };
        let mut seen = HashSet::new();
        let items: Vec<ContextMenuItem> = p
            .collected
            .into_iter()
            .flat_map(|((_, service), items)| {
                items.into_iter().map(move |i| ContextMenuItem {
                    service: service.clone(),
                    action_id: i.action_id,
                    label: i.label,
                    enabled: i.enabled,
                })
            })
            .filter(|i| seen.insert((i.service.clone(), i.action_id.clone())))
            .collect();
        let response = MenuResponse {
            menu_id: menu_id.to_string(),
            items,
        };
        let env = self.envelope(MessageType::MenuResponse, Some(&p.app), Some(&p.request_id), &response);
        send_env(&session.tx, &env);
    }

    /// Removes every trace of `client` and tells the affected parties.
    pub fn disconnect(&self, client: &str) {
        let mut inner = self.lock();
        if inner.sessions.remove(client).is_none() {
            return;
        }
        inner.registry.deregister(client);
        inner.departed.insert(client.to_string());
        inner.announced.remove(client);
        for apps in inner.docs.values_mut() {
            apps.remove(client);
        }
        inner.docs.retain(|_, apps| !apps.is_empty());
        inner.windows.retain(|(a, s, _)| a != client && s != client);

        let gone: Vec<(String, String)> = inner
            .inflight
            .iter()
            .filter(|(_, (_, recipient))| recipient == client)
            .map(|(id, (requester, _))| (id.clone(), requester.clone()))
            .collect();
        inner.inflight.retain(|_, (requester, recipient)| requester != client && recipient != client);
        for (id, requester) in gone {
            if let Some(s) = inner.sessions.get(&requester) {
                self.send_error(&s.tx, &requester, Some(&id), ErrorCode::Gone, &format!("{client} disconnected"));
            }
        }

        inner.menus.retain(|_, p| p.app != client);
        let finished: Vec<String> = inner
            .menus
            .iter_mut()
            .filter_map(|(id, p)| (p.awaiting.remove(client) && p.awaiting.is_empty()).then(|| id.clone()))
            .collect();
        for id in finished {
            let p = inner.menus.remove(&id).expect("present");
            self.finish_menu_locked(&inner, &id, p);
        }
        self.announce_changes(&mut inner);
        tracing::info!(client, "client disconnected");
    }

    /// Asks every connection to close.
    pub fn close_all(&self) {
        for s in self.lock().sessions.values() {
            let _ = s.tx.send(Outbound::Close);
        }
    }

    pub fn client_count(&self) -> usize {
        self.lock().sessions.len()
    }

    /// Live client ids by role, in id order.
    pub fn clients(&self, role: Role) -> Vec<String> {
        self.lock()
            .sessions
            .iter()
            .filter(|(_, s)| s.role == role)
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn is_integrated(&self, service: &str, app: &str) -> bool {
        self.lock().registry.integration_matrix().is_integrated(service, app)
    }

    /// Every stored record, regardless of who can see it.
    pub fn records(&self) -> Vec<SemanticRecord> {
        self.store.list(&RecordFilter::default())
    }
}
