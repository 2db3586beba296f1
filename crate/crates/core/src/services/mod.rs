//! Reference MKM services. Each one is a message-driven state machine
//! behind [`MkmService`]; the runtime feeds it envelopes and sends whatever
//! it leaves in the [`Outbox`].

mod linker;
mod lookup;
mod navigation;
mod ontology;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde_json::Value;

use crate::adm::SemanticRecord;
use crate::protocol::messages::{MenuItemSpec, MenuQuery};
use crate::protocol::{Envelope, ModuleInterfaceId, ObjectRef};
pub use crate::protocol::Outbox;

pub use linker::ConceptLinker;
pub use lookup::DefinitionLookup;
pub use navigation::SemanticNavigation;
pub use ontology::{
    GraphEdge, GraphNode, Neighborhood, Ontology, OntologyConcept, OntologyError, Relation,
};

/// Semantic record key holding an object's linked concept uri.
pub const CONCEPT_KEY: &str = "org.mkm.concept";

pub const LINK_LABEL: &str = "Link to concept";
pub const DEFINE_LABEL: &str = "Get definition";
pub const NAVIGATE_LABEL: &str = "Semantic navigation";

pub trait MkmService: Send {
    /// Registration name; also the primary sort key for menu items.
    fn name(&self) -> &'static str;

    fn requires(&self) -> BTreeSet<ModuleInterfaceId>;

    /// Items for one context menu. Must depend on the query and the
    /// ontology only.
    fn menu_items(&self, query: &MenuQuery) -> Vec<MenuItemSpec>;

    /// Everything other than `menu.query`.
    fn handle(&mut self, envelope: &Envelope, out: &mut Outbox<'_>);
}

/// Concept uri linked to `object`, if any, according to `records`.
pub fn linked_concept<'r>(records: &'r [SemanticRecord], object: &ObjectRef) -> Option<&'r str> {
    records
        .iter()
        .find(|r| r.key == CONCEPT_KEY && r.object.as_ref() == Some(object))
        .and_then(|r| r.value.as_str())
}

/// First object of `selection`, in selection order, that has a linked
/// concept.
pub fn first_linked<'s>(
    selection: &'s [ObjectRef],
    records: &[SemanticRecord],
) -> Option<(&'s ObjectRef, String)> {
    selection
        .iter()
        .find_map(|o| linked_concept(records, o).map(|uri| (o, uri.to_string())))
}

pub(crate) fn status_payload(window_id: &str, text: &str) -> Value {
    serde_json::json!({
        "windowId": window_id,
        "event": "status",
        "data": { "text": text },
    })
}

type Factory = Box<dyn Fn(Arc<Ontology>) -> Box<dyn MkmService> + Send + Sync>;

/// Name-keyed constructors for the services a host process can run.
pub struct ServiceRegistry {
    factories: BTreeMap<&'static str, Factory>,
}

impl Default for ServiceRegistry {
    fn default() -> Self {
        Self::standard()
    }
}

impl ServiceRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register(ConceptLinker::NAME, |o| Box::new(ConceptLinker::new(o)));
        r.register(DefinitionLookup::NAME, |o| Box::new(DefinitionLookup::new(o)));
        r.register(SemanticNavigation::NAME, |o| Box::new(SemanticNavigation::new(o)));
        r
    }

    pub fn register<F>(&mut self, name: &'static str, factory: F)
    where
        F: Fn(Arc<Ontology>) -> Box<dyn MkmService> + Send + Sync + 'static,
    {
        self.factories.insert(name, Box::new(factory));
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.factories.keys().copied().collect()
    }

    pub fn create(&self, name: &str, ontology: Arc<Ontology>) -> Option<Box<dyn MkmService>> {
        self.factories.get(name).map(|f| f(ontology))
    }

    /// Instantiates every registered service, in name order.
    pub fn create_all(&self, ontology: Arc<Ontology>) -> Vec<Box<dyn MkmService>> {
        self.factories.values().map(|f| f(ontology.clone())).collect()
    }
}
