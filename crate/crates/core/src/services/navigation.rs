use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use serde_json::{json, Value};

use super::{first_linked, status_payload, MkmService, Ontology, Outbox, CONCEPT_KEY, NAVIGATE_LABEL};
use crate::protocol::messages::{
    FocusAck, FocusRequest, MenuInvoke, MenuItemSpec, MenuQuery, RecordEntry, StorageList,
    StorageRecords, WindowEvent,
};
use crate::protocol::{
    mid, Envelope, MessageType, ModuleInterfaceId, Renderer, WindowSpec, CORE_MENU,
    CORE_SELECTION, CORE_STORAGE,
};

struct GraphWindow {
    app: String,
}

enum Pending {
    List { window_id: String },
    Focus { window_id: String, app_name: String },
}

/// Shows the ontology neighbourhood of a linked concept and jumps to
/// objects linked to a clicked node.
pub struct SemanticNavigation {
    ontology: Arc<Ontology>,
    windows: HashMap<String, GraphWindow>,
    pending: HashMap<String, Pending>,
    windows_opened: u64,
}

/// First match by (application name, locator). Records without an owner
/// sort last.
pub fn pick_focus_target(entries: &[RecordEntry]) -> Option<&RecordEntry> {
    entries
        .iter()
        .filter(|e| e.record.object.is_some())
        .min_by(|a, b| {
            let key = |e: &RecordEntry| {
                (
                    e.app.is_none(),
                    e.app.as_ref().map(|o| o.name.clone()).unwrap_or_default(),
                    e.record.object.as_ref().map(|o| o.locator.clone()).unwrap_or_default(),
                )
            };
            key(a).cmp(&key(b))
        })
}

impl SemanticNavigation {
    pub const NAME: &'static str = "semantic-navigation";

    pub fn new(ontology: Arc<Ontology>) -> Self {
        Self {
            ontology,
            windows: HashMap::new(),
            pending: HashMap::new(),
            windows_opened: 0,
        }
    }

    fn open_graph(&mut self, env: &Envelope, uri: &str, out: &mut Outbox<'_>) {
        self.windows_opened += 1;
        let window_id = format!("{}-{}", Self::NAME, self.windows_opened);
        let spec = match self.ontology.neighborhood(uri) {
            Some(n) => WindowSpec {
                window_id: window_id.clone(),
                title: format!("Navigate: {}", self.ontology.get(uri).map_or(uri, |c| &c.label)),
                renderer: Renderer::NavigationGraph,
                data: serde_json::to_value(&n).expect("neighborhood serializes"),
                size: None,
            },
            None => WindowSpec {
                window_id: window_id.clone(),
                title: "Semantic navigation".into(),
                renderer: Renderer::PlainText,
                data: json!({ "text": format!("unknown concept {uri}") }),
                size: None,
            },
        };
        out.send(MessageType::WindowOpen, Some(&env.from), Some(&env.id), &spec);
        self.windows.insert(window_id, GraphWindow { app: env.from.clone() });
    }

    fn status(&self, window_id: &str, text: &str, out: &mut Outbox<'_>) {
        if let Some(w) = self.windows.get(window_id) {
            out.send(MessageType::WindowEvent, Some(&w.app), Some(window_id), &status_payload(window_id, text));
        }
    }

    fn on_window_event(&mut self, ev: WindowEvent, out: &mut Outbox<'_>) {
        if !self.windows.contains_key(&ev.window_id) {
            return;
        }
        match ev.event.as_str() {
            "node-clicked" => {
                let Some(uri) = ev.data.get("conceptUri").and_then(Value::as_str) else {
                    return;
                };
                let list = StorageList {
                    doc: None,
                    key: Some(CONCEPT_KEY.into()),
                    value: Some(Value::String(uri.into())),
                };
                let id = out.send(MessageType::StorageList, None, None, &list);
                self.pending.insert(id, Pending::List { window_id: ev.window_id });
            }
            "closed" => {
                self.windows.remove(&ev.window_id);
                self.pending.retain(|_, p| match p {
                    Pending::List { window_id } | Pending::Focus { window_id, .. } => {
                        *window_id != ev.window_id
                    }
                });
            }
            _ => {}
        }
    }

    fn on_reply(&mut self, env: &Envelope, out: &mut Outbox<'_>) {
        let Some(pending) = env.corr.as_deref().and_then(|c| self.pending.remove(c)) else {
            return;
        };
        match pending {
            Pending::List { window_id } => {
                let entries = env
                    .payload_as::<StorageRecords>()
                    .map(|r| r.entries)
                    .unwrap_or_default();
                let Some(target) = pick_focus_target(&entries) else {
                    self.status(&window_id, "no linked object", out);
                    return;
                };
                let owner = target.app.as_ref();
                let Some(owner) = owner.filter(|o| o.can_focus) else {
                    let name = owner.map_or("unknown application", |o| o.name.as_str());
                    self.status(&window_id, &format!("cannot focus {name}"), out);
                    return;
                };
                let req = FocusRequest {
                    select: target.record.object.clone(),
                };
                let id = out.send(MessageType::FocusRequest, Some(&owner.client_id), None, &req);
                self.pending.insert(
                    id,
                    Pending::Focus {
                        window_id,
                        app_name: owner.name.clone(),
                    },
                );
            }
            Pending::Focus { window_id, app_name } => {
                let focused = env.kind == MessageType::FocusAck
                    && env.payload_as::<FocusAck>().is_ok_and(|a| a.focused);
                let text = if focused {
                    format!("focused {app_name}")
                } else {
                    format!("cannot focus {app_name}")
                };
                self.status(&window_id, &text, out);
            }
        }
    }
}

impl MkmService for SemanticNavigation {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn requires(&self) -> BTreeSet<ModuleInterfaceId> {
        [mid(CORE_SELECTION), mid(CORE_MENU), mid(CORE_STORAGE)].into()
    }

    fn menu_items(&self, query: &MenuQuery) -> Vec<MenuItemSpec> {
        match first_linked(&query.selection, &query.records) {
            Some(_) => vec![MenuItemSpec::new("navigate", NAVIGATE_LABEL)],
            None => Vec::new(),
        }
    }

    fn handle(&mut self, env: &Envelope, out: &mut Outbox<'_>) {
        match env.kind {
            MessageType::MenuInvoke => {
                let Ok(invoke) = env.payload_as::<MenuInvoke>() else { return };
                if invoke.action_id != "navigate" {
                    return;
                }
                if let Some((_, uri)) = first_linked(&invoke.selection, &invoke.records) {
                    self.open_graph(env, &uri, out);
                }
            }
            MessageType::WindowEvent => {
                if let Ok(ev) = env.payload_as::<WindowEvent>() {
                    self.on_window_event(ev, out);
                }
            }
            MessageType::StorageRecords | MessageType::FocusAck | MessageType::Error => {
                self.on_reply(env, out)
            }
            _ => {}
        }
    }
}
