use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::protocol::{ObjectRef, OBJECT_KINDS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LoadError {
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("malformed {what}: {reason}")]
    Parse { what: &'static str, reason: String },
    #[error("duplicate locator {0:?}")]
    DuplicateLocator(String),
    #[error("unknown object kind {0:?}")]
    UnknownKind(String),
    #[error("{0}")]
    Invalid(String),
}

pub(crate) fn read_file(path: &Path) -> Result<String, LoadError> {
    std::fs::read_to_string(path).map_err(|e| LoadError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

#[derive(Deserialize)]
struct DocumentFile {
    uri: String,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    objects: Vec<ObjectFile>,
}

#[derive(Deserialize)]
struct ObjectFile {
    kind: String,
    locator: String,
    #[serde(default)]
    payload: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MockObject {
    pub object: ObjectRef,
    pub payload: String,
}

/// A synthetic document: typed objects with unique locators.
#[derive(Debug, Clone, PartialEq)]
pub struct MockDocument {
    uri: String,
    name: Option<String>,
    objects: Vec<MockObject>,
    by_locator: HashMap<String, usize>,
}

impl MockDocument {
    pub fn new(uri: impl Into<String>) -> Self {
        Self {
            uri: uri.into(),
            name: None,
            objects: Vec::new(),
            by_locator: HashMap::new(),
        }
    }

    pub fn with_object(mut self, kind: &str, locator: &str, payload: &str) -> Result<Self, LoadError> {
        self.add(kind, locator, payload)?;
        Ok(self)
    }

    fn add(&mut self, kind: &str, locator: &str, payload: &str) -> Result<(), LoadError> {
        if !OBJECT_KINDS.contains(&kind) {
            return Err(LoadError::UnknownKind(kind.to_string()));
        }
        if self.by_locator.contains_key(locator) {
            return Err(LoadError::DuplicateLocator(locator.to_string()));
        }
        self.by_locator.insert(locator.to_string(), self.objects.len());
        self.objects.push(MockObject {
            object: ObjectRef::new(self.uri.clone(), kind, locator),
            payload: payload.to_string(),
        });
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, LoadError> {
        let file: DocumentFile = serde_json::from_str(text).map_err(|e| LoadError::Parse {
            what: "document",
            reason: e.to_string(),
        })?;
        if file.uri.is_empty() {
            return Err(LoadError::Invalid("document uri is empty".into()));
        }
        let mut doc = Self::new(file.uri);
        doc.name = file.name;
        for o in file.objects {
            doc.add(&o.kind, &o.locator, &o.payload)?;
        }
        Ok(doc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LoadError> {
        Self::from_json(&read_file(path.as_ref())?)
    }

    pub fn uri(&self) -> &str {
        &self.uri
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn objects(&self) -> &[MockObject] {
        &self.objects
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn get(&self, locator: &str) -> Option<&ObjectRef> {
        self.by_locator.get(locator).map(|&i| &self.objects[i].object)
    }

    pub fn contains(&self, object: &ObjectRef) -> bool {
        self.get(&object.locator) == Some(object)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_objects_in_order() {
        let doc = MockDocument::from_json(
            r#"{"uri": "docA", "objects": [
                {"kind": "text-range", "locator": "t1", "payload": "O"},
                {"kind": "image", "locator": "i1"}]}"#,
        )
        .unwrap();
        assert_eq!(doc.len(), 2);
        assert_eq!(doc.get("i1").unwrap(), &ObjectRef::new("docA", "image", "i1"));
        assert!(doc.contains(&ObjectRef::new("docA", "text-range", "t1")));
        assert!(!doc.contains(&ObjectRef::new("docB", "text-range", "t1")));
        assert!(!doc.contains(&ObjectRef::new("docA", "image", "t1")));
    }

    #[test]
    fn empty_document() {
        let doc = MockDocument::from_json(r#"{"uri": "docA", "objects": []}"#).unwrap();
        assert!(doc.is_empty());
    }

    #[test]
    fn duplicate_locator_rejected() {
        let err = MockDocument::from_json(
            r#"{"uri": "docA", "objects": [
                {"kind": "text-range", "locator": "x"}, {"kind": "formula", "locator": "x"}]}"#,
        )
        .unwrap_err();
        assert_eq!(err, LoadError::DuplicateLocator("x".into()));
    }

    #[test]
    fn unknown_kind_rejected() {
        let err = MockDocument::from_json(r#"{"uri": "d", "objects": [{"kind": "blob", "locator": "x"}]}"#);
        assert_eq!(err.unwrap_err(), LoadError::UnknownKind("blob".into()));
    }
}
