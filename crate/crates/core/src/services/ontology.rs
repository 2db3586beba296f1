use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OntologyError {
    #[error("cannot read ontology: {0}")]
    Io(String),
    #[error("malformed ontology: {0}")]
    Parse(String),
    #[error("duplicate concept uri {0:?}")]
    DuplicateUri(String),
    #[error("concept {from:?} relates to missing concept {target:?}")]
    DanglingTarget { from: String, target: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    #[serde(rename = "type")]
    pub relation_type: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OntologyConcept {
    pub uri: String,
    pub label: String,
    pub definition: String,
    #[serde(default)]
    pub relations: Vec<Relation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub uri: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GraphEdge {
    pub source: String,
    #[serde(rename = "type")]
    pub relation_type: String,
    pub target: String,
}

/// Distance-1 neighbourhood of a concept along its outgoing relations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Neighborhood {
    pub root: String,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

/// Immutable concept index, keyed by uri.
#[derive(Debug, Clone, Default)]
pub struct Ontology {
    concepts: Vec<OntologyConcept>,
    by_uri: HashMap<String, usize>,
}

impl Ontology {
    pub fn from_concepts(concepts: Vec<OntologyConcept>) -> Result<Self, OntologyError> {
        let mut by_uri = HashMap::with_capacity(concepts.len());
        for (i, c) in concepts.iter().enumerate() {
            if by_uri.insert(c.uri.clone(), i).is_some() {
                return Err(OntologyError::DuplicateUri(c.uri.clone()));
            }
        }
        for c in &concepts {
            if let Some(r) = c.relations.iter().find(|r| !by_uri.contains_key(&r.target)) {
                return Err(OntologyError::DanglingTarget {
                    from: c.uri.clone(),
                    target: r.target.clone(),
                });
            }
        }
        Ok(Self { concepts, by_uri })
    }

    pub fn from_json(text: &str) -> Result<Self, OntologyError> {
        let concepts: Vec<OntologyConcept> =
            serde_json::from_str(text).map_err(|e| OntologyError::Parse(e.to_string()))?;
        Self::from_concepts(concepts)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, OntologyError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| OntologyError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn get(&self, uri: &str) -> Option<&OntologyConcept> {
        self.by_uri.get(uri).map(|&i| &self.concepts[i])
    }

    pub fn concepts(&self) -> &[OntologyConcept] {
        &self.concepts
    }

    /// Case-insensitive label substring search, in file order.
    pub fn search(&self, needle: &str) -> Vec<&OntologyConcept> {
        let needle = needle.to_lowercase();
        self.concepts
            .iter()
            .filter(|c| c.label.to_lowercase().contains(&needle))
            .collect()
    }

    pub fn neighborhood(&self, uri: &str) -> Option<Neighborhood> {
        let root = self.get(uri)?;
        let mut seen = BTreeSet::new();
        let mut nodes = Vec::new();
        for u in std::iter::once(&root.uri).chain(root.relations.iter().map(|r| &r.target)) {
            if seen.insert(u.as_str()) {
                let c = self.get(u).expect("relation targets validated at load");
                nodes.push(GraphNode {
                    uri: c.uri.clone(),
                    label: c.label.clone(),
                });
            }
        }
        let mut edges: Vec<GraphEdge> = Vec::new();
        for r in &root.relations {
            let e = GraphEdge {
                source: root.uri.clone(),
                relation_type: r.relation_type.clone(),
                target: r.target.clone(),
            };
            if !edges.contains(&e) {
                edges.push(e);
            }
        }
        Some(Neighborhood {
            root: root.uri.clone(),
            nodes,
            edges,
        })
    }
}
