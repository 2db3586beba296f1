use std::collections::BTreeSet;
use std::sync::Arc;

use serde_json::json;

use super::{first_linked, MkmService, Ontology, Outbox, DEFINE_LABEL};
use crate::protocol::messages::{MenuInvoke, MenuItemSpec, MenuQuery};
use crate::protocol::{
    mid, Envelope, MessageType, ModuleInterfaceId, Renderer, WindowSpec, CORE_MENU,
    CORE_SELECTION, CORE_STORAGE,
};

/// Shows the definition of the concept linked to the selection.
pub struct DefinitionLookup {
    ontology: Arc<Ontology>,
    windows_opened: u64,
}

impl DefinitionLookup {
    pub const NAME: &'static str = "definition-lookup";

    pub fn new(ontology: Arc<Ontology>) -> Self {
        Self {
            ontology,
            windows_opened: 0,
        }
    }

    /// Window for `uri`: the definition card, or a plain-text error when the
    /// ontology no longer knows the concept.
    pub fn definition_window(&self, window_id: String, uri: &str) -> WindowSpec {
        match self.ontology.get(uri) {
            Some(c) => WindowSpec {
                window_id,
                title: c.label.clone(),
                renderer: Renderer::DefinitionView,
                data: json!({
                    "conceptUri": c.uri,
                    "label": c.label,
                    "definition": c.definition,
                }),
                size: None,
            },
            None => WindowSpec {
                window_id,
                title: "Definition".into(),
                renderer: Renderer::PlainText,
                data: json!({ "text": format!("unknown concept {uri}") }),
                size: None,
            },
        }
    }
}

impl MkmService for DefinitionLookup {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn requires(&self) -> BTreeSet<ModuleInterfaceId> {
        [mid(CORE_SELECTION), mid(CORE_MENU), mid(CORE_STORAGE)].into()
    }

    fn menu_items(&self, query: &MenuQuery) -> Vec<MenuItemSpec> {
        match first_linked(&query.selection, &query.records) {
            Some(_) => vec![MenuItemSpec::new("define", DEFINE_LABEL)],
            None => Vec::new(),
        }
    }

    fn handle(&mut self, env: &Envelope, out: &mut Outbox<'_>) {
        if env.kind != MessageType::MenuInvoke {
            return;
        }
        let Ok(invoke) = env.payload_as::<MenuInvoke>() else { return };
        if invoke.action_id != "define" {
            return;
        }
        let Some((_, uri)) = first_linked(&invoke.selection, &invoke.records) else {
            return;
        };
        self.windows_opened += 1;
        let spec = self.definition_window(format!("{}-{}", Self::NAME, self.windows_opened), &uri);
        out.send(MessageType::WindowOpen, Some(&env.from), Some(&env.id), &spec);
    }
}
