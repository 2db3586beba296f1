//! Headless application client model. [`MockApp`] owns a synthetic
//! document, answers the application-side messages of the modules it
//! declares, records windows, markings and focus, and advances script
//! steps. It performs no I/O; a runtime driver feeds it envelopes.

mod document;
mod script;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use serde_json::Value;

use crate::protocol::messages::{
    DocOpened, ErrorPayload, FocusAck, FocusRequest, Hello, MarkingClear, MarkingSet, MenuInvoke,
    MenuRequest, MenuResponse, Reject, Role, SelectionChanged, SelectionSet, Welcome, WindowClose,
    WindowEvent,
};
use crate::protocol::{
    ContextMenuItem, Envelope, ErrorCode, MessageType, ModuleInterfaceId, ObjectRef, Outbox,
    Renderer, WindowSpec, BROKER_ID,
};

pub use document::{LoadError, MockDocument, MockObject};
pub use script::{
    load_script, parse_script, AppReport, FocusRecord, Matcher, Observed, RefSpec, ScriptStep,
    StepReport, Verdict,
};

/// A window the app is displaying on behalf of a service.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct OpenWindow {
    pub service: String,
    pub spec: WindowSpec,
    pub statuses: Vec<String>,
    seq: u64,
}

/// Where a script step stands after one attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Progress {
    Done,
    /// Not satisfiable yet; the reason becomes the failure detail if the
    /// step times out.
    Pending(String),
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
enum MenuState {
    None,
    Waiting(String),
    Ready(Vec<ContextMenuItem>),
    Failed(String),
}

pub struct MockApp {
    name: String,
    document: MockDocument,
    implements: BTreeSet<ModuleInterfaceId>,
    client_id: Option<String>,
    rejected: Option<Reject>,
    integrations: Vec<String>,
    selection: Vec<ObjectRef>,
    focus: Vec<FocusRecord>,
    marks: BTreeMap<String, MarkingSet>,
    windows: BTreeMap<String, OpenWindow>,
    window_seq: u64,
    menu: MenuState,
    errors: Vec<String>,
    log: Vec<Observed>,
}

impl MockApp {
    pub fn new(name: impl Into<String>, document: MockDocument, implements: BTreeSet<ModuleInterfaceId>) -> Self {
        Self {
            name: name.into(),
            document,
            implements,
            client_id: None,
            rejected: None,
            integrations: Vec::new(),
            selection: Vec::new(),
            focus: Vec::new(),
            marks: BTreeMap::new(),
            windows: BTreeMap::new(),
            window_seq: 0,
            menu: MenuState::None,
            errors: Vec::new(),
            log: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn document(&self) -> &MockDocument {
        &self.document
    }

    pub fn implements(&self, module: &str) -> bool {
        self.implements.iter().any(|m| m.to_string() == module)
    }

    pub fn hello(&self) -> Hello {
        Hello {
            role: Role::Application,
            name: self.name.clone(),
            implements: self.implements.iter().cloned().collect(),
            requires: Vec::new(),
        }
    }

    pub fn doc_opened(&self) -> DocOpened {
        DocOpened {
            doc: self.document.uri().to_string(),
            name: self.document.name().map(str::to_string),
        }
    }

    pub fn client_id(&self) -> Option<&str> {
        self.client_id.as_deref()
    }

    pub fn rejected(&self) -> Option<&Reject> {
        self.rejected.as_ref()
    }

    pub fn integrations(&self) -> &[String] {
        &self.integrations
    }

    pub fn selection(&self) -> &[ObjectRef] {
        &self.selection
    }

    pub fn focus_records(&self) -> &[FocusRecord] {
        &self.focus
    }

    pub fn marks(&self) -> &BTreeMap<String, MarkingSet> {
        &self.marks
    }

    pub fn windows(&self) -> &BTreeMap<String, OpenWindow> {
        &self.windows
    }

    pub fn errors(&self) -> &[String] {
        &self.errors
    }

    /// Every envelope received so far, in arrival order.
    pub fn log(&self) -> &[Observed] {
        &self.log
    }

    /// Drops state that is not meant to survive a reconnect.
    pub fn reset_session(&mut self) {
        self.client_id = None;
        self.integrations.clear();
        self.marks.clear();
        self.windows.clear();
        self.menu = MenuState::None;
    }

    fn reply_to(env: &Envelope) -> Option<&str> {
        (env.from != BROKER_ID).then_some(env.from.as_str())
    }

    fn refuse(&mut self, env: &Envelope, code: ErrorCode, message: String, out: &mut Outbox<'_>) {
        self.errors.push(format!("{code}: {message}"));
        out.send(
            MessageType::Error,
            Self::reply_to(env),
            Some(&env.id),
            &ErrorPayload::new(code, message),
        );
    }

    fn unknown_objects<'o>(&self, objects: impl IntoIterator<Item = &'o ObjectRef>) -> Option<String> {
        let bad: Vec<String> = objects
            .into_iter()
            .filter(|o| !self.document.contains(o))
            .map(|o| o.locator.clone())
            .collect();
        (!bad.is_empty()).then(|| format!("objects not in {}: {}", self.document.uri(), bad.join(", ")))
    }

    /// Applies one inbound envelope.
    pub fn on_envelope(&mut self, env: &Envelope, out: &mut Outbox<'_>) {
        self.log.push(Observed {
            kind: env.kind.to_string(),
            from: env.from.clone(),
            corr: env.corr.clone(),
        });
        if env.kind == MessageType::Error {
            self.on_error(env);
            return;
        }
        if let Some(module) = env.kind.module() {
            if !self.implements(module) {
                let msg = format!("{} needs {module}", env.kind);
                self.refuse(env, ErrorCode::NotImplemented, msg, out);
                return;
            }
        }
        if let Err(e) = self.apply(env, out) {
            self.refuse(env, ErrorCode::Malformed, e, out);
        }
    }

    fn apply(&mut self, env: &Envelope, out: &mut Outbox<'_>) -> Result<(), String> {
        let bad = |e: crate::protocol::ProtocolError| e.to_string();
        match env.kind {
            MessageType::Welcome => {
                let w: Welcome = env.payload_as().map_err(bad)?;
                self.client_id = Some(w.client_id);
                self.integrations = w.integrations.into_iter().map(|p| p.client_id).collect();
            }
            MessageType::Reject => {
                self.rejected = Some(env.payload_as().map_err(bad)?);
            }
            MessageType::SelectionSet => {
                let s: SelectionSet = env.payload_as().map_err(bad)?;
                if let Some(e) = self.unknown_objects(&s.objects) {
                    return Err(e);
                }
                self.selection = s.objects;
                let ack = SelectionChanged {
                    objects: self.selection.clone(),
                };
                out.send(MessageType::SelectionChanged, Self::reply_to(env), Some(&env.id), &ack);
            }
            MessageType::FocusRequest => {
                let f: FocusRequest = env.payload_as().map_err(bad)?;
                if let Some(e) = self.unknown_objects(&f.select) {
                    return Err(e);
                }
                if let Some(o) = &f.select {
                    self.selection = vec![o.clone()];
                }
                self.focus.push(FocusRecord {
                    from: env.from.clone(),
                    select: f.select,
                });
                let ack = FocusAck {
                    focused: true,
                    selection: self.selection.clone(),
                };
                out.send(MessageType::FocusAck, Self::reply_to(env), Some(&env.id), &ack);
            }
            MessageType::MarkingSet => {
                let m: MarkingSet = env.payload_as().map_err(bad)?;
                if let Some(e) = self.unknown_objects(&m.objects) {
                    return Err(e);
                }
                self.marks.insert(m.mark_id.clone(), m);
            }
            MessageType::MarkingClear => {
                let m: MarkingClear = env.payload_as().map_err(bad)?;
                self.marks.remove(&m.mark_id);
            }
            MessageType::WindowOpen => {
                let spec: WindowSpec = env.payload_as().map_err(bad)?;
                if self.windows.contains_key(&spec.window_id) {
                    let msg = format!("window {} is already open", spec.window_id);
                    self.refuse(env, ErrorCode::DuplicateWindow, msg, out);
                    return Ok(());
                }
                self.window_seq += 1;
                self.windows.insert(
                    spec.window_id.clone(),
                    OpenWindow {
                        service: env.from.clone(),
                        spec,
                        statuses: Vec::new(),
                        seq: self.window_seq,
                    },
                );
            }
            MessageType::WindowClose => {
                let c: WindowClose = env.payload_as().map_err(bad)?;
                if self.windows.remove(&c.window_id).is_none() {
                    let msg = format!("no window {}", c.window_id);
                    self.refuse(env, ErrorCode::UnknownWindow, msg, out);
                }
            }
            MessageType::WindowEvent => {
                let ev: WindowEvent = env.payload_as().map_err(bad)?;
                if let Some(w) = self.windows.get_mut(&ev.window_id) {
                    if let Some(text) = ev.data.get("text").and_then(Value::as_str) {
                        w.statuses.push(text.to_string());
                    }
                }
            }
            MessageType::MenuResponse => {
                let r: MenuResponse = env.payload_as().map_err(bad)?;
                if matches!(&self.menu, MenuState::Waiting(id) if env.corr.as_deref() == Some(id.as_str())) {
                    self.menu = MenuState::Ready(r.items);
                }
            }
            // replies to requests the app itself made; nothing to update
            MessageType::SelectionChanged | MessageType::StorageRecords | MessageType::FocusAck => {}
            other => {
                let msg = format!("applications do not handle {other}");
                self.refuse(env, ErrorCode::NotImplemented, msg, out);
            }
        }
        Ok(())
    }

    fn on_error(&mut self, env: &Envelope) {
        let text = match env.payload_as::<ErrorPayload>() {
            Ok(e) => format!("{}: {}", e.code, e.message),
            Err(e) => e.to_string(),
        };
        if matches!(&self.menu, MenuState::Waiting(id) if env.corr.as_deref() == Some(id.as_str())) {
            self.menu = MenuState::Failed(text.clone());
        }
        self.errors.push(text);
    }

    fn resolve(&self, spec: &RefSpec) -> Result<ObjectRef, String> {
        match spec {
            RefSpec::Locator(l) => self
                .document
                .get(l)
                .cloned()
                .ok_or_else(|| format!("no object {l:?} in {}", self.document.uri())),
            RefSpec::Full(o) => Ok(o.clone()),
        }
    }

    fn resolve_all(&self, specs: &[RefSpec]) -> Result<Vec<ObjectRef>, String> {
        specs.iter().map(|s| self.resolve(s)).collect()
    }

    fn menu_items(&self) -> Result<&[ContextMenuItem], Progress> {
        match &self.menu {
            MenuState::None => Err(Progress::Failed("no menu was requested".into())),
            MenuState::Waiting(_) => Err(Progress::Pending("waiting for menu.response".into())),
            MenuState::Failed(e) => Err(Progress::Failed(format!("menu request failed: {e}"))),
            MenuState::Ready(items) => Ok(items),
        }
    }

    fn find_window(&self, window_id: Option<&str>, renderer: Option<Renderer>) -> Option<&OpenWindow> {
        self.windows
            .values()
            .filter(|w| window_id.is_none_or(|id| w.spec.window_id == id))
            .filter(|w| renderer.is_none_or(|r| w.spec.renderer == r))
            .max_by_key(|w| w.seq)
    }

    /// Attempts one script step. `wait` is the driver's business and always
    /// reports done here.
    pub fn advance(&mut self, step: &ScriptStep, out: &mut Outbox<'_>) -> Progress {
        match step {
            ScriptStep::Select { objects } => match self.resolve_all(objects) {
                Ok(objs) => {
                    self.selection = objs;
                    if self.implements(crate::protocol::CORE_SELECTION) {
                        let ev = SelectionChanged {
                            objects: self.selection.clone(),
                        };
                        out.send(MessageType::SelectionChanged, None, None, &ev);
                    }
                    Progress::Done
                }
                Err(e) => Progress::Failed(e),
            },
            ScriptStep::RequestMenu {} => {
                let req = MenuRequest {
                    selection: self.selection.clone(),
                };
                let id = out.send(MessageType::MenuRequest, None, None, &req);
                self.menu = MenuState::Waiting(id);
                Progress::Done
            }
            ScriptStep::ExpectMenu { matcher, label } => {
                let items = match self.menu_items() {
                    Ok(items) => items,
                    Err(p) => return p,
                };
                let labels: Vec<&str> = items.iter().map(|i| i.label.as_str()).collect();
                let present = labels.contains(&label.as_str());
                let want = *matcher == Matcher::ContainsLabel;
                if present == want {
                    Progress::Done
                } else {
                    Progress::Failed(format!(
                        "expected menu {} {label:?}, got {labels:?}",
                        if want { "to contain" } else { "without" }
                    ))
                }
            }
            ScriptStep::Invoke { label } => {
                let items = match self.menu_items() {
                    Ok(items) => items,
                    Err(p) => return p,
                };
                let Some(item) = items.iter().find(|i| &i.label == label && i.enabled) else {
                    let labels: Vec<&str> = items.iter().map(|i| i.label.as_str()).collect();
                    return Progress::Failed(format!("no enabled item {label:?} in {labels:?}"));
                };
                let invoke = MenuInvoke {
                    action_id: item.action_id.clone(),
                    selection: self.selection.clone(),
                    records: Vec::new(),
                };
                let service = item.service.clone();
                out.send(MessageType::MenuInvoke, Some(&service), None, &invoke);
                Progress::Done
            }
            ScriptStep::ExpectWindow {
                matcher,
                renderer,
                label,
                data,
                status,
            } => {
                let found = self.windows.values().any(|w| {
                    renderer.is_none_or(|r| w.spec.renderer == r)
                        && label.as_ref().is_none_or(|l| &w.spec.title == l)
                        && data.as_ref().is_none_or(|d| subset(d, &w.spec.data))
                        && status.as_ref().is_none_or(|s| w.statuses.contains(s))
                });
                let want = *matcher == Matcher::ContainsLabel;
                if found == want {
                    Progress::Done
                } else {
                    let open: Vec<String> = self
                        .windows
                        .values()
                        .map(|w| format!("{}({})", w.spec.window_id, w.spec.renderer.as_str()))
                        .collect();
                    let what = if want { "a matching window" } else { "no matching window" };
                    Progress::Pending(format!("expected {what}; open: {open:?}"))
                }
            }
            ScriptStep::WindowEvent {
                window_id,
                renderer,
                event,
                data,
            } => {
                let Some(w) = self.find_window(window_id.as_deref(), *renderer) else {
                    return Progress::Pending("no matching window to send the event to".into());
                };
                let id = w.spec.window_id.clone();
                let service = w.service.clone();
                let ev = WindowEvent {
                    window_id: id.clone(),
                    event: event.clone(),
                    data: data.clone(),
                };
                out.send(MessageType::WindowEvent, Some(&service), Some(&id), &ev);
                if event == "closed" {
                    self.windows.remove(&id);
                }
                Progress::Done
            }
            ScriptStep::ExpectSelection { matcher, objects } => {
                let want = match matcher {
                    Matcher::Absent => Vec::new(),
                    _ => match self.resolve_all(objects) {
                        Ok(o) => o,
                        Err(e) => return Progress::Failed(e),
                    },
                };
                if self.selection == want {
                    Progress::Done
                } else {
                    Progress::Pending(format!("expected selection {want:?}, got {:?}", self.selection))
                }
            }
            ScriptStep::ExpectMarking {
                matcher,
                mark_id,
                objects,
            } => {
                let ok = match matcher {
                    Matcher::Absent => match mark_id {
                        Some(id) => !self.marks.contains_key(id),
                        None => self.marks.is_empty(),
                    },
                    _ => {
                        let want = match self.resolve_all(objects) {
                            Ok(o) => o,
                            Err(e) => return Progress::Failed(e),
                        };
                        self.marks
                            .values()
                            .filter(|m| mark_id.as_ref().is_none_or(|id| &m.mark_id == id))
                            .any(|m| m.objects == want)
                    }
                };
                if ok {
                    Progress::Done
                } else {
                    let marks: Vec<&String> = self.marks.keys().collect();
                    Progress::Pending(format!("marking mismatch; marks: {marks:?}"))
                }
            }
            ScriptStep::Wait { .. } => Progress::Done,
        }
    }

    pub fn report(&self, steps: Vec<StepReport>) -> AppReport {
        let failed = steps.iter().any(|s| s.verdict == Verdict::Fail);
        AppReport {
            app: self.name.clone(),
            client_id: self.client_id.clone().unwrap_or_default(),
            verdict: if failed { Verdict::Fail } else { Verdict::Pass },
            steps,
            selection: self.selection.clone(),
            focus: self.focus.clone(),
            windows: self.windows.keys().cloned().collect(),
            marks: self.marks.keys().cloned().collect(),
            errors: self.errors.clone(),
        }
    }
}

/// True when every key of `want` appears in `have` with an equal value,
/// recursively for objects.
pub fn subset(want: &Value, have: &Value) -> bool {
    match (want, have) {
        (Value::Object(w), Value::Object(h)) => w
            .iter()
            .all(|(k, v)| h.get(k).is_some_and(|hv| subset(v, hv))),
        _ => want == have,
    }
}

#[cfg(test)]
mod tests;
