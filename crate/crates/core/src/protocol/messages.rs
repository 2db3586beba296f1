//! Message vocabulary and payload schemas.
//!
//! Every message type has exactly one payload struct. Decoding an envelope
//! deserializes its payload into that struct, so a payload that parses here
//! is, by definition, schema-valid.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::standard::{CORE_FOCUS, CORE_MARKING, CORE_MENU, CORE_SELECTION, CORE_STORAGE};
use super::{ContextMenuItem, ModuleInterfaceId, ObjectRef, ProtocolError, WindowSpec};
use crate::adm::SemanticRecord;

macro_rules! message_types {
    ($($variant:ident => $text:literal : $payload:ty),+ $(,)?) => {
        /// The closed set of message types understood on the wire.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum MessageType {
            $($variant),+
        }

        impl MessageType {
            pub const ALL: &'static [MessageType] = &[$(MessageType::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(MessageType::$variant => $text),+
                }
            }

            /// Checks `payload` against the schema registered for this type.
            pub fn validate_payload(self, payload: &Value) -> Result<(), ProtocolError> {
                if !payload.is_object() {
                    return Err(ProtocolError::InvalidPayload {
                        kind: self.as_str().to_string(),
                        reason: "payload must be a JSON object".to_string(),
                    });
                }
                match self {
                    $(MessageType::$variant => {
                        <$payload as Deserialize>::deserialize(payload)
                            .map(|_| ())
                            .map_err(|e| ProtocolError::InvalidPayload {
                                kind: $text.to_string(),
                                reason: e.to_string(),
                            })
                    }),+
                }
            }
        }

        impl FromStr for MessageType {
            type Err = ProtocolError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok(MessageType::$variant),)+
                    other => Err(ProtocolError::UnknownMessageType(other.to_string())),
                }
            }
        }
    };
}

message_types! {
    Hello => "sally.hello": Hello,
    Welcome => "sally.welcome": Welcome,
    Reject => "sally.reject": Reject,
    SelectionChanged => "selection.changed": SelectionChanged,
    SelectionSet => "selection.set": SelectionSet,
    StoragePut => "storage.put": StoragePut,
    StorageGet => "storage.get": StorageGet,
    StorageDelete => "storage.delete": StorageDelete,
    StorageList => "storage.list": StorageList,
    StorageRecords => "storage.records": StorageRecords,
    MenuRequest => "menu.request": MenuRequest,
    MenuQuery => "menu.query": MenuQuery,
    MenuItems => "menu.items": MenuItems,
    MenuResponse => "menu.response": MenuResponse,
    MenuInvoke => "menu.invoke": MenuInvoke,
    FocusRequest => "focus.request": FocusRequest,
    FocusAck => "focus.ack": FocusAck,
    MarkingSet => "marking.set": MarkingSet,
    MarkingClear => "marking.clear": MarkingClear,
    WindowOpen => "window.open": WindowSpec,
    WindowClose => "window.close": WindowClose,
    WindowEvent => "window.event": WindowEvent,
    DocOpened => "doc.opened": DocOpened,
    DocClosed => "doc.closed": DocClosed,
    ObjectDeleted => "object.deleted": ObjectDeleted,
    Error => "error": ErrorPayload,
}

impl MessageType {
    /// The interaction module a message belongs to, for the types that
    /// belong to one.
    pub fn module(self) -> Option<&'static str> {
        use MessageType::*;
        match self {
            SelectionChanged | SelectionSet => Some(CORE_SELECTION),
            StoragePut | StorageGet | StorageDelete | StorageList | StorageRecords => Some(CORE_STORAGE),
            MenuRequest | MenuQuery | MenuItems | MenuResponse | MenuInvoke => Some(CORE_MENU),
            FocusRequest | FocusAck => Some(CORE_FOCUS),
            MarkingSet | MarkingClear => Some(CORE_MARKING),
            _ => None,
        }
    }
}

impl fmt::Display for MessageType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for MessageType {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for MessageType {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Application,
    Service,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::Application => f.write_str("application"),
            Role::Service => f.write_str("service"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hello {
    pub role: Role,
    pub name: String,
    #[serde(default)]
    pub implements: Vec<ModuleInterfaceId>,
    #[serde(default)]
    pub requires: Vec<ModuleInterfaceId>,
}

/// Another live client, as seen by the receiver of a welcome.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Peer {
    pub client_id: String,
    pub name: String,
}

/// Sent once after a successful handshake, and again (with `update` set)
/// whenever the receiver's integration partners change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Welcome {
    pub client_id: String,
    pub role: Role,
    pub integrations: Vec<Peer>,
    #[serde(default)]
    pub effective: Vec<ModuleInterfaceId>,
    #[serde(default)]
    pub update: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RejectReason {
    UnknownModule,
    Version,
    Malformed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reject {
    pub reason: RejectReason,
    #[serde(default)]
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionChanged {
    pub objects: Vec<ObjectRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSet {
    pub objects: Vec<ObjectRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoragePut {
    pub record: SemanticRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageGet {
    pub doc: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<ObjectRef>,
    pub key: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageDelete {
    pub doc: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<ObjectRef>,
    pub key: String,
}

/// Filter for `storage.list`; absent fields match anything.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StorageList {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Value>,
}

/// Owning application of a listed record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RecordOwner {
    pub client_id: String,
    pub name: String,
    pub can_focus: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordEntry {
    pub record: SemanticRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub app: Option<RecordOwner>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StorageRecords {
    pub entries: Vec<RecordEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub purged: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MenuRequest {
    pub selection: Vec<ObjectRef>,
}

/// Fan-out from the broker to each integrated service. Carries a snapshot
/// of the semantic records attached to the selection and the requesting
/// application's effective capabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MenuQuery {
    pub menu_id: String,
    pub app: String,
    pub app_name: String,
    pub selection: Vec<ObjectRef>,
    #[serde(default)]
    pub records: Vec<SemanticRecord>,
    #[serde(default)]
    pub capabilities: Vec<ModuleInterfaceId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MenuItemSpec {
    pub action_id: String,
    pub label: String,
    #[serde(default = "default_true")]
    pub enabled: bool,
}

fn default_true() -> bool {
    true
}

impl MenuItemSpec {
    pub fn new(action_id: &str, label: &str) -> Self {
        Self {
            action_id: action_id.to_string(),
            label: label.to_string(),
            enabled: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MenuItems {
    pub menu_id: String,
    pub items: Vec<MenuItemSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MenuResponse {
    pub menu_id: String,
    pub items: Vec<ContextMenuItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MenuInvoke {
    pub action_id: String,
    pub selection: Vec<ObjectRef>,
    /// Filled in by the broker on the way through.
    #[serde(default)]
    pub records: Vec<SemanticRecord>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FocusRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub select: Option<ObjectRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocusAck {
    pub focused: bool,
    #[serde(default)]
    pub selection: Vec<ObjectRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MarkingSet {
    pub mark_id: String,
    pub objects: Vec<ObjectRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub style: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MarkingClear {
    pub mark_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WindowClose {
    pub window_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WindowEvent {
    pub window_id: String,
    pub event: String,
    #[serde(default)]
    pub data: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocOpened {
    pub doc: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocClosed {
    pub doc: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectDeleted {
    pub object: ObjectRef,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorCode {
    NotIntegrated,
    UnknownClient,
    Gone,
    DuplicateWindow,
    UnknownWindow,
    NotImplemented,
    Malformed,
    UnknownMessageType,
    InvalidRecord,
    UnknownConcept,
    Internal,
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub code: ErrorCode,
    #[serde(default)]
    pub message: String,
}

impl ErrorPayload {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}
