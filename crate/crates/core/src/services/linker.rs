use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use serde_json::{json, Value};

use super::{status_payload, MkmService, Ontology, Outbox, CONCEPT_KEY, LINK_LABEL};
use crate::adm::SemanticRecord;
use crate::protocol::messages::{
    ErrorPayload, MenuInvoke, MenuItemSpec, MenuQuery, StoragePut, WindowClose, WindowEvent,
};
use crate::protocol::{
    mid, Envelope, ErrorCode, MessageType, ModuleInterfaceId, ObjectRef, Renderer, WindowSpec,
    CORE_MENU, CORE_SELECTION, CORE_STORAGE,
};

struct Picker {
    app: String,
    selection: Vec<ObjectRef>,
    outstanding: BTreeSet<String>,
}

/// Links selected objects to ontology concepts picked in a window.
pub struct ConceptLinker {
    ontology: Arc<Ontology>,
    pickers: HashMap<String, Picker>,
    puts: HashMap<String, String>,
    windows_opened: u64,
}

impl ConceptLinker {
    pub const NAME: &'static str = "concept-linker";

    pub fn new(ontology: Arc<Ontology>) -> Self {
        Self {
            ontology,
            pickers: HashMap::new(),
            puts: HashMap::new(),
            windows_opened: 0,
        }
    }

    fn open_picker(&mut self, env: &Envelope, invoke: MenuInvoke, out: &mut Outbox<'_>) {
        self.windows_opened += 1;
        let window_id = format!("{}-{}", Self::NAME, self.windows_opened);
        let concepts: Vec<Value> = self
            .ontology
            .concepts()
            .iter()
            .map(|c| json!({"uri": c.uri, "label": c.label}))
            .collect();
        let spec = WindowSpec {
            window_id: window_id.clone(),
            title: "Link to concept".into(),
            renderer: Renderer::ConceptPicker,
            data: json!({ "concepts": concepts, "selection": invoke.selection }),
            size: None,
        };
        out.send(MessageType::WindowOpen, Some(&env.from), Some(&env.id), &spec);
        self.pickers.insert(
            window_id,
            Picker {
                app: env.from.clone(),
                selection: invoke.selection,
                outstanding: BTreeSet::new(),
            },
        );
    }

    fn on_window_event(&mut self, env: &Envelope, ev: WindowEvent, out: &mut Outbox<'_>) {
        let Some(picker) = self.pickers.get_mut(&ev.window_id) else {
            return;
        };
        match ev.event.as_str() {
            "picked" => {
                let uri = ev.data.get("conceptUri").and_then(Value::as_str).unwrap_or_default();
                if self.ontology.get(uri).is_none() {
                    let err = ErrorPayload::new(ErrorCode::UnknownConcept, format!("unknown concept {uri:?}"));
                    out.send(MessageType::Error, Some(&env.from), Some(&env.id), &err);
                    out.send(
                        MessageType::WindowEvent,
                        Some(&env.from),
                        Some(&ev.window_id),
                        &status_payload(&ev.window_id, &format!("unknown concept {uri}")),
                    );
                    return;
                }
                for object in &picker.selection {
                    let record = SemanticRecord::object(object.clone(), CONCEPT_KEY, Value::String(uri.to_string()));
                    let id = out.send(MessageType::StoragePut, None, None, &StoragePut { record });
                    picker.outstanding.insert(id.clone());
                    self.puts.insert(id, ev.window_id.clone());
                }
                if picker.outstanding.is_empty() {
                    self.close(&ev.window_id, out);
                }
            }
            "closed" => {
                self.pickers.remove(&ev.window_id);
            }
            _ => {}
        }
    }

    fn on_put_reply(&mut self, env: &Envelope, out: &mut Outbox<'_>) {
        let Some(corr) = env.corr.as_deref() else { return };
        let Some(window_id) = self.puts.remove(corr) else { return };
        let failed = env.kind == MessageType::Error;
        let Some(picker) = self.pickers.get_mut(&window_id) else { return };
        picker.outstanding.remove(corr);
        if failed {
            let reason = env
                .payload_as::<ErrorPayload>()
                .map(|e| e.message)
                .unwrap_or_default();
            let app = picker.app.clone();
            out.send(
                MessageType::WindowEvent,
                Some(&app),
                Some(&window_id),
                &status_payload(&window_id, &format!("could not store link: {reason}")),
            );
        }
        if picker.outstanding.is_empty() {
            self.close(&window_id, out);
        }
    }

    fn close(&mut self, window_id: &str, out: &mut Outbox<'_>) {
        if let Some(picker) = self.pickers.remove(window_id) {
            out.send(
                MessageType::WindowClose,
                Some(&picker.app),
                Some(window_id),
                &WindowClose {
                    window_id: window_id.to_string(),
                },
            );
        }
    }

    #[cfg(test)]
    fn open_windows(&self) -> usize {
        self.pickers.len()
    }
}

impl MkmService for ConceptLinker {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn requires(&self) -> BTreeSet<ModuleInterfaceId> {
        [mid(CORE_SELECTION), mid(CORE_MENU)].into()
    }

    /// Offered whenever the application can store semantic information,
    /// including for objects that are already linked (relinking).
    fn menu_items(&self, query: &MenuQuery) -> Vec<MenuItemSpec> {
        let can_store = query.capabilities.contains(&mid(CORE_STORAGE));
        if can_store && !query.selection.is_empty() {
            vec![MenuItemSpec::new("link", LINK_LABEL)]
        } else {
            Vec::new()
        }
    }

    fn handle(&mut self, env: &Envelope, out: &mut Outbox<'_>) {
        match env.kind {
            MessageType::MenuInvoke => {
                if let Ok(invoke) = env.payload_as::<MenuInvoke>() {
                    if invoke.action_id == "link" {
                        self.open_picker(env, invoke, out);
                    }
                }
            }
            MessageType::WindowEvent => {
                if let Ok(ev) = env.payload_as::<WindowEvent>() {
                    self.on_window_event(env, ev, out);
                }
            }
            MessageType::StorageRecords | MessageType::Error => self.on_put_reply(env, out),
            _ => {}
        }
    }
}
