//! Wire protocol shared by the broker, services and application clients.
//!
//! One [`Envelope`] per WebSocket text frame, encoded as a single JSON
//! object. The payload schema is selected by the envelope's `type`.

mod id;
pub mod messages;
mod standard;

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

pub use id::{mid, ModuleInterfaceId};
pub use messages::{ErrorCode, MessageType, Role};
pub use standard::{
    standard_modules, ADM_SEMANTIC, CORE_FOCUS, CORE_MARKING, CORE_MENU, CORE_SELECTION,
    CORE_STORAGE,
};

pub const PROTOCOL_VERSION: &str = "1";

/// `from` of envelopes the broker originates itself.
pub const BROKER_ID: &str = "broker";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("invalid module interface id {0:?}")]
    InvalidModuleId(String),
    #[error("input is not a JSON object: {0}")]
    NotJson(String),
    #[error("malformed envelope: field `{field}` {reason}")]
    MalformedEnvelope { field: &'static str, reason: String },
    #[error("unknown message type {0:?}")]
    UnknownMessageType(String),
    #[error("invalid `{kind}` payload: {reason}")]
    InvalidPayload { kind: String, reason: String },
    #[error("payload is not representable as JSON: {0}")]
    Encoding(String),
}

/// Opaque reference to a selectable object inside a document.
///
/// Only the owning application interprets `locator`; everybody else
/// compares references field by field.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ObjectRef {
    pub doc: String,
    pub kind: String,
    pub locator: String,
}

impl ObjectRef {
    pub fn new(doc: impl Into<String>, kind: impl Into<String>, locator: impl Into<String>) -> Self {
        Self {
            doc: doc.into(),
            kind: kind.into(),
            locator: locator.into(),
        }
    }
}

/// Object kinds the demo applications can annotate.
pub const OBJECT_KINDS: &[&str] = &[
    "text-range",
    "cell-range",
    "chart",
    "shape",
    "image",
    "formula",
    "text-box",
    "slide",
    "table",
    "form",
    "query",
    "report",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ContextMenuItem {
    pub service: String,
    pub action_id: String,
    pub label: String,
    pub enabled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Renderer {
    DefinitionView,
    ConceptPicker,
    NavigationGraph,
    PlainText,
}

impl Renderer {
    pub fn as_str(self) -> &'static str {
        match self {
            Renderer::DefinitionView => "definition-view",
            Renderer::ConceptPicker => "concept-picker",
            Renderer::NavigationGraph => "navigation-graph",
            Renderer::PlainText => "plain-text",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSize {
    pub width: u32,
    pub height: u32,
}

/// A window the client-side screen manager should display: a named
/// renderer plus renderer-specific data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WindowSpec {
    pub window_id: String,
    pub title: String,
    pub renderer: Renderer,
    pub data: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<WindowSize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub v: String,
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corr: Option<String>,
    pub from: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<String>,
    #[serde(rename = "type")]
    pub kind: MessageType,
    pub payload: Value,
}

impl Envelope {
    /// Builds an envelope from a typed payload.
    pub fn new<P: Serialize>(
        id: impl Into<String>,
        from: impl Into<String>,
        kind: MessageType,
        payload: &P,
    ) -> Result<Self, ProtocolError> {
        let payload = serde_json::to_value(payload).map_err(|e| ProtocolError::Encoding(e.to_string()))?;
        kind.validate_payload(&payload)?;
        Ok(Self {
            v: PROTOCOL_VERSION.to_string(),
            id: id.into(),
            corr: None,
            from: from.into(),
            to: None,
            kind,
            payload,
        })
    }

    pub fn to(mut self, to: impl Into<String>) -> Self {
        self.to = Some(to.into());
        self
    }

    pub fn reply_to(mut self, corr: impl Into<String>) -> Self {
        self.corr = Some(corr.into());
        self
    }

    pub fn payload_as<T: for<'de> Deserialize<'de>>(&self) -> Result<T, ProtocolError> {
        T::deserialize(&self.payload).map_err(|e| ProtocolError::InvalidPayload {
            kind: self.kind.as_str().to_string(),
            reason: e.to_string(),
        })
    }
}

pub fn encode_envelope(e: &Envelope) -> Result<Vec<u8>, ProtocolError> {
    serde_json::to_vec(e).map_err(|err| ProtocolError::Encoding(err.to_string()))
}

pub fn encode_envelope_text(e: &Envelope) -> Result<String, ProtocolError> {
    serde_json::to_string(e).map_err(|err| ProtocolError::Encoding(err.to_string()))
}

/// Parses and validates one frame. Field checks run in a fixed order
/// (`v`, `id`, `type`, `from`, `payload`) so the first missing field is the
/// one reported.
pub fn decode_envelope(bytes: &[u8]) -> Result<Envelope, ProtocolError> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| ProtocolError::NotJson(e.to_string()))?;
    let Value::Object(mut obj) = value else {
        return Err(ProtocolError::NotJson("top-level value is not an object".into()));
    };
    let v = take_string(&mut obj, "v")?;
    let id = take_string(&mut obj, "id")?;
    let kind_text = take_string(&mut obj, "type")?;
    let kind: MessageType = kind_text.parse()?;
    let from = take_string(&mut obj, "from")?;
    let corr = take_optional_string(&mut obj, "corr")?;
    let to = take_optional_string(&mut obj, "to")?;
    let payload = obj.remove("payload").ok_or(ProtocolError::MalformedEnvelope {
        field: "payload",
        reason: "is missing".into(),
    })?;
    if let Some(extra) = obj.keys().next() {
        return Err(ProtocolError::MalformedEnvelope {
            field: "envelope",
            reason: format!("has unexpected key {extra:?}"),
        });
    }
    kind.validate_payload(&payload)?;
    Ok(Envelope {
        v,
        id,
        corr,
        from,
        to,
        kind,
        payload,
    })
}

fn take_string(obj: &mut Map<String, Value>, field: &'static str) -> Result<String, ProtocolError> {
    match obj.remove(field) {
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(ProtocolError::MalformedEnvelope {
            field,
            reason: "is not a string".into(),
        }),
        None => Err(ProtocolError::MalformedEnvelope {
            field,
            reason: "is missing".into(),
        }),
    }
}

fn take_optional_string(
    obj: &mut Map<String, Value>,
    field: &'static str,
) -> Result<Option<String>, ProtocolError> {
    match obj.remove(field) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(_) => Err(ProtocolError::MalformedEnvelope {
            field,
            reason: "is not a string".into(),
        }),
    }
}

/// Mints message ids that are unique for the lifetime of one connection.
#[derive(Debug)]
pub struct IdGen {
    prefix: String,
    next: AtomicU64,
}

impl IdGen {
    pub fn new(prefix: impl Into<String>) -> Self {
        Self {
            prefix: prefix.into(),
            next: AtomicU64::new(1),
        }
    }

    pub fn next_id(&self) -> String {
        let n = self.next.fetch_add(1, Ordering::Relaxed);
        format!("{}-{}", self.prefix, n)
    }
}

/// Collects envelopes to send on behalf of one client.
pub struct Outbox<'a> {
    from: &'a str,
    ids: &'a IdGen,
    queued: Vec<Envelope>,
}

impl<'a> Outbox<'a> {
    pub fn new(from: &'a str, ids: &'a IdGen) -> Self {
        Self {
            from,
            ids,
            queued: Vec::new(),
        }
    }

    /// Queues a message and returns its id.
    pub fn send<P: Serialize>(
        &mut self,
        kind: MessageType,
        to: Option<&str>,
        corr: Option<&str>,
        payload: &P,
    ) -> String {
        let id = self.ids.next_id();
        let mut e = Envelope::new(id.clone(), self.from, kind, payload)
            .unwrap_or_else(|err| panic!("service built an invalid {kind} payload: {err}"));
        e.to = to.map(str::to_string);
        e.corr = corr.map(str::to_string);
        self.queued.push(e);
        id
    }

    pub fn is_empty(&self) -> bool {
        self.queued.is_empty()
    }

    pub fn drain(&mut self) -> Vec<Envelope> {
        std::mem::take(&mut self.queued)
    }
}

#[cfg(test)]
mod tests {
    use super::messages::*;
    use super::*;
    use serde_json::json;

    fn hello() -> Envelope {
        Envelope::new(
            "c-1",
            "",
            MessageType::Hello,
            &Hello {
                role: Role::Application,
                name: "writer".into(),
                implements: vec![mid("core.selection/1")],
                requires: vec![],
            },
        )
        .unwrap()
    }

    #[test]
    fn minimal_hello_keys_and_identity() {
        let bytes = encode_envelope(&hello()).unwrap();
        let v: Value = serde_json::from_slice(&bytes).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(sorted, ["from", "id", "payload", "type", "v"]);
        let again = encode_envelope(&decode_envelope(&bytes).unwrap()).unwrap();
        assert_eq!(again, bytes);
    }

    #[test]
    fn corr_is_serialized_when_set() {
        let e = hello().reply_to("x-9");
        let text = encode_envelope_text(&e).unwrap();
        assert!(text.contains("\"corr\":\"x-9\""));
        assert_eq!(decode_envelope(text.as_bytes()).unwrap(), e);
    }

    #[test]
    fn empty_object_reports_missing_v() {
        match decode_envelope(b"{}") {
            Err(ProtocolError::MalformedEnvelope { field, .. }) => assert_eq!(field, "v"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_id_and_type_are_named() {
        let no_id = json!({"v": "1", "type": "error", "from": "", "payload": {"code": "Gone"}});
        match decode_envelope(no_id.to_string().as_bytes()) {
            Err(ProtocolError::MalformedEnvelope { field, .. }) => assert_eq!(field, "id"),
            other => panic!("unexpected {other:?}"),
        }
        let no_type = json!({"v": "1", "id": "a", "from": "", "payload": {}});
        match decode_envelope(no_type.to_string().as_bytes()) {
            Err(ProtocolError::MalformedEnvelope { field, .. }) => assert_eq!(field, "type"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_type_is_reported() {
        let e = json!({"v": "1", "id": "a", "type": "bogus.x", "from": "", "payload": {}});
        assert_eq!(
            decode_envelope(e.to_string().as_bytes()),
            Err(ProtocolError::UnknownMessageType("bogus.x".into()))
        );
    }

    #[test]
    fn payload_schema_is_enforced() {
        let e = json!({"v": "1", "id": "a", "type": "menu.request", "from": "x", "payload": {"sel": []}});
        assert!(matches!(
            decode_envelope(e.to_string().as_bytes()),
            Err(ProtocolError::InvalidPayload { .. })
        ));
    }

    #[test]
    fn non_string_keys_fail_to_encode() {
        use std::collections::BTreeMap;
        let mut weird = BTreeMap::new();
        weird.insert((1, 2), "x");
        let err = Envelope::new("a", "b", MessageType::WindowEvent, &weird).unwrap_err();
        assert!(matches!(err, ProtocolError::Encoding(_)));
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(decode_envelope(b"not json"), Err(ProtocolError::NotJson(_))));
        assert!(matches!(decode_envelope(b"[1,2]"), Err(ProtocolError::NotJson(_))));
        let extra = json!({"v": "1", "id": "a", "type": "doc.closed", "from": "", "payload": {"doc": "d"}, "x": 1});
        assert!(matches!(
            decode_envelope(extra.to_string().as_bytes()),
            Err(ProtocolError::MalformedEnvelope { field: "envelope", .. })
        ));
    }

    #[test]
    fn id_gen_is_unique() {
        let ids = IdGen::new("m");
        let a = ids.next_id();
        let b = ids.next_id();
        assert_ne!(a, b);
        assert!(a.starts_with("m-"));
    }
}
