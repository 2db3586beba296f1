//! Middleware-hosted abstract document model: semantic records attached to
//! whole documents or to individual objects, persisted as one JSON file.
//!
//! Every mutation bumps a generation counter. A mutation is durable once
//! [`SemanticStore::flushed_generation`] has caught up with the generation
//! it returned, which lets callers batch several writes into one flush
//! before acknowledging any of them.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::protocol::ObjectRef;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdmError {
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("store i/o: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Document,
    Object,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SemanticRecord {
    pub scope: Scope,
    pub doc: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<ObjectRef>,
    pub key: String,
    pub value: Value,
    /// Unix milliseconds, stamped by the store on write.
    #[serde(default)]
    pub updated_at: u64,
}

impl SemanticRecord {
    pub fn document(doc: impl Into<String>, key: impl Into<String>, value: Value) -> Self {
        Self {
            scope: Scope::Document,
            doc: doc.into(),
            object: None,
            key: key.into(),
            value,
            updated_at: 0,
        }
    }

    pub fn object(object: ObjectRef, key: impl Into<String>, value: Value) -> Self {
        Self {
            scope: Scope::Object,
            doc: object.doc.clone(),
            object: Some(object),
            key: key.into(),
            value,
            updated_at: 0,
        }
    }

    pub fn validate(&self) -> Result<(), AdmError> {
        match (self.scope, &self.object) {
            (Scope::Object, None) => {
                return Err(AdmError::InvalidRecord("object scope requires an object".into()))
            }
            (Scope::Object, Some(o)) if o.doc != self.doc => {
                return Err(AdmError::InvalidRecord(format!(
                    "object belongs to {:?}, record to {:?}",
                    o.doc, self.doc
                )))
            }
            (Scope::Document, Some(_)) => {
                return Err(AdmError::InvalidRecord("document scope must not carry an object".into()))
            }
            _ => {}
        }
        if self.doc.is_empty() {
            return Err(AdmError::InvalidRecord("empty document uri".into()));
        }
        if !valid_key(&self.key) {
            return Err(AdmError::InvalidRecord(format!("bad key {:?}", self.key)));
        }
        Ok(())
    }

    fn primary_key(&self) -> RecordKey {
        RecordKey {
            scope: self.scope,
            doc: self.doc.clone(),
            object: self.object.clone(),
            key: self.key.clone(),
        }
    }
}

fn valid_key(key: &str) -> bool {
    !key.is_empty()
        && key.split('.').all(|seg| {
            !seg.is_empty()
                && seg
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        })
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct RecordKey {
    scope: Scope,
    doc: String,
    object: Option<ObjectRef>,
    key: String,
}

impl RecordKey {
    fn lookup(doc: &str, object: Option<&ObjectRef>, key: &str) -> Self {
        Self {
            scope: if object.is_some() { Scope::Object } else { Scope::Document },
            doc: doc.to_string(),
            object: object.cloned(),
            key: key.to_string(),
        }
    }
}

/// Record filter; `None` fields match anything.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecordFilter {
    pub doc: Option<String>,
    pub key: Option<String>,
    pub value: Option<Value>,
}

impl RecordFilter {
    fn matches(&self, r: &SemanticRecord) -> bool {
        self.doc.as_ref().is_none_or(|d| *d == r.doc)
            && self.key.as_ref().is_none_or(|k| *k == r.key)
            && self.value.as_ref().is_none_or(|v| *v == r.value)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub loaded: usize,
    pub skipped: usize,
}

#[derive(Debug, Default)]
struct State {
    records: BTreeMap<RecordKey, SemanticRecord>,
    generation: u64,
    flushed: u64,
}

#[derive(Debug)]
pub struct SemanticStore {
    path: Option<PathBuf>,
    state: RwLock<State>,
    writer: Mutex<()>,
}

impl SemanticStore {
    pub fn in_memory() -> Self {
        Self {
            path: None,
            state: RwLock::new(State::default()),
            writer: Mutex::new(()),
        }
    }

    /// Opens (or starts) the store at `path`. Entries that fail validation
    /// are skipped with a warning rather than failing the whole load.
    pub fn open(path: impl AsRef<Path>) -> Result<(Self, LoadReport), AdmError> {
        let path = path.as_ref().to_path_buf();
        let mut report = LoadReport::default();
        let mut records = BTreeMap::new();
        match fs::read_to_string(&path) {
            Ok(text) => {
                let raw: Vec<Value> = serde_json::from_str(&text)
                    .map_err(|e| AdmError::Io(format!("{}: not a JSON array: {e}", path.display())))?;
                for (i, entry) in raw.into_iter().enumerate() {
                    let parsed = serde_json::from_value::<SemanticRecord>(entry)
                        .map_err(|e| AdmError::InvalidRecord(e.to_string()))
                        .and_then(|r| r.validate().map(|_| r));
                    match parsed {
                        Ok(r) => {
                            records.insert(r.primary_key(), r);
                            report.loaded += 1;
                        }
                        Err(e) => {
                            log::warn!("{}: skipping entry {i}: {e}", path.display());
                            report.skipped += 1;
                        }
                    }
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(AdmError::Io(format!("{}: {e}", path.display()))),
        }
        let store = Self {
            path: Some(path),
            state: RwLock::new(State {
                records,
                generation: 0,
                flushed: 0,
            }),
            writer: Mutex::new(()),
        };
        Ok((store, report))
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Upserts by primary key and returns the mutation's generation.
    pub fn put(&self, mut record: SemanticRecord) -> Result<u64, AdmError> {
        record.validate()?;
        record.updated_at = now_millis();
        let mut st = self.state.write().expect("store lock");
        st.records.insert(record.primary_key(), record);
        st.generation += 1;
        Ok(st.generation)
    }

    pub fn get(&self, doc: &str, object: Option<&ObjectRef>, key: &str) -> Option<SemanticRecord> {
        let st = self.state.read().expect("store lock");
        st.records.get(&RecordKey::lookup(doc, object, key)).cloned()
    }

    /// Removes one record; returns it together with the mutation generation.
    pub fn delete(
        &self,
        doc: &str,
        object: Option<&ObjectRef>,
        key: &str,
    ) -> (Option<SemanticRecord>, u64) {
        let mut st = self.state.write().expect("store lock");
        let removed = st.records.remove(&RecordKey::lookup(doc, object, key));
        if removed.is_some() {
            st.generation += 1;
        }
        (removed, st.generation)
    }

    pub fn list(&self, filter: &RecordFilter) -> Vec<SemanticRecord> {
        let st = self.state.read().expect("store lock");
        st.records.values().filter(|r| filter.matches(r)).cloned().collect()
    }

    pub fn list_doc(&self, doc: &str) -> Vec<SemanticRecord> {
        self.list(&RecordFilter {
            doc: Some(doc.to_string()),
            ..Default::default()
        })
    }

    /// Object-scope records attached to any of `objects`, in the order the
    /// objects are given.
    pub fn records_for(&self, objects: &[ObjectRef]) -> Vec<SemanticRecord> {
        let st = self.state.read().expect("store lock");
        objects
            .iter()
            .flat_map(|o| {
                st.records
                    .values()
                    .filter(move |r| r.object.as_ref() == Some(o))
                    .cloned()
            })
            .collect()
    }

    /// Purges every object-scope record of `object`. Returns the number
    /// purged and the mutation generation.
    pub fn on_object_deleted(&self, object: &ObjectRef) -> (usize, u64) {
        let mut st = self.state.write().expect("store lock");
        let before = st.records.len();
        st.records.retain(|_, r| r.object.as_ref() != Some(object));
        let purged = before - st.records.len();
        if purged > 0 {
            st.generation += 1;
        }
        (purged, st.generation)
    }

    pub fn len(&self) -> usize {
        self.state.read().expect("store lock").records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn generation(&self) -> u64 {
        self.state.read().expect("store lock").generation
    }

    pub fn flushed_generation(&self) -> u64 {
        self.state.read().expect("store lock").flushed
    }

    pub fn is_dirty(&self) -> bool {
        let st = self.state.read().expect("store lock");
        st.generation > st.flushed
    }

    /// Writes a snapshot if anything changed since the last flush and
    /// returns the generation now known durable. In-memory stores treat
    /// every mutation as durable.
    pub fn flush(&self) -> Result<u64, AdmError> {
        let _writer = self.writer.lock().expect("writer lock");
        let (snapshot, generation) = {
            let st = self.state.read().expect("store lock");
            if st.generation == st.flushed {
                return Ok(st.flushed);
            }
            (st.records.values().cloned().collect::<Vec<_>>(), st.generation)
        };
        if let Some(path) = &self.path {
            let bytes = serde_json::to_vec_pretty(&snapshot).map_err(|e| AdmError::Io(e.to_string()))?;
            atomic_write(path, &bytes)?;
        }
        let mut st = self.state.write().expect("store lock");
        st.flushed = st.flushed.max(generation);
        Ok(st.flushed)
    }

    pub fn put_durable(&self, record: SemanticRecord) -> Result<(), AdmError> {
        self.put(record)?;
        self.flush().map(|_| ())
    }
}

/// temp file in the same directory, fsync, rename over the target.
fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), AdmError> {
    let io = |e: std::io::Error| AdmError::Io(format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let mut file = File::create(&tmp).map_err(io)?;
    file.write_all(bytes).map_err(io)?;
    file.sync_all().map_err(io)?;
    drop(file);
    fs::rename(&tmp, path).map_err(io)?;
    Ok(())
}

fn now_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}
