use serde_json::json;

use super::*;
use crate::protocol::messages::Peer;
use crate::protocol::{mid, IdGen};

fn doc() -> MockDocument {
    MockDocument::new("docA")
        .with_object("text-range", "t1", "O")
        .unwrap()
        .with_object("text-range", "t2", "V")
        .unwrap()
        .with_object("image", "i1", "")
        .unwrap()
}

fn app(modules: &[&str]) -> MockApp {
    MockApp::new("writer", doc(), modules.iter().map(|m| mid(m)).collect())
}

fn full() -> MockApp {
    app(&["core.selection/1", "core.menu/1", "core.focus/1", "core.marking/1"])
}

fn t(loc: &str) -> ObjectRef {
    doc().get(loc).unwrap().clone()
}

struct Io {
    ids: IdGen,
    n: u64,
}

impl Io {
    fn new() -> Self {
        Self {
            ids: IdGen::new("app"),
            n: 0,
        }
    }

    fn feed<P: Serialize>(&mut self, a: &mut MockApp, kind: MessageType, from: &str, payload: &P) -> Vec<Envelope> {
        self.n += 1;
        let env = Envelope::new(format!("in-{}", self.n), from, kind, payload).unwrap();
        self.deliver(a, env)
    }

    fn deliver(&mut self, a: &mut MockApp, env: Envelope) -> Vec<Envelope> {
        let mut out = Outbox::new("app-1", &self.ids);
        a.on_envelope(&env, &mut out);
        out.drain()
    }

    fn step(&mut self, a: &mut MockApp, step: ScriptStep) -> (Progress, Vec<Envelope>) {
        let mut out = Outbox::new("app-1", &self.ids);
        let p = a.advance(&step, &mut out);
        (p, out.drain())
    }
}

fn error_code(e: &Envelope) -> ErrorCode {
    assert_eq!(e.kind, MessageType::Error);
    e.payload_as::<ErrorPayload>().unwrap().code
}

fn window(id: &str, renderer: Renderer) -> WindowSpec {
    WindowSpec {
        window_id: id.into(),
        title: "w".into(),
        renderer,
        data: json!({"conceptUri": "uri:vertex", "definition": "A point."}),
        size: None,
    }
}

fn menu_item(service: &str, label: &str) -> ContextMenuItem {
    ContextMenuItem {
        service: service.into(),
        action_id: label.to_lowercase(),
        label: label.into(),
        enabled: true,
    }
}

#[test]
fn welcome_records_identity() {
    let mut a = full();
    let mut io = Io::new();
    let w = Welcome {
        client_id: "app-7".into(),
        role: Role::Application,
        integrations: vec![Peer {
            client_id: "svc-1".into(),
            name: "concept-linker".into(),
        }],
        effective: vec![],
        update: false,
    };
    assert!(io.feed(&mut a, MessageType::Welcome, BROKER_ID, &w).is_empty());
    assert_eq!(a.client_id(), Some("app-7"));
    assert_eq!(a.integrations(), ["svc-1"]);
}

#[test]
fn focus_with_select_records_and_acks() {
    let mut a = full();
    let mut io = Io::new();
    let sent = io.feed(&mut a, MessageType::FocusRequest, "svc-3", &FocusRequest { select: Some(t("t2")) });
    assert_eq!(sent.len(), 1);
    assert_eq!(sent[0].kind, MessageType::FocusAck);
    assert_eq!(sent[0].to.as_deref(), Some("svc-3"));
    assert_eq!(sent[0].corr.as_deref(), Some("in-1"));
    assert_eq!(a.selection(), [t("t2")]);
    assert_eq!(a.focus_records().len(), 1);

    // no select: ack, selection unchanged
    let sent = io.feed(&mut a, MessageType::FocusRequest, "svc-3", &FocusRequest { select: None });
    assert_eq!(sent[0].payload_as::<FocusAck>().unwrap().selection, [t("t2")]);
}

#[test]
fn focus_for_foreign_object_is_refused() {
    let mut a = full();
    let mut io = Io::new();
    let foreign = ObjectRef::new("docB", "text-range", "t1");
    let sent = io.feed(&mut a, MessageType::FocusRequest, "svc-3", &FocusRequest { select: Some(foreign) });
    assert_eq!(error_code(&sent[0]), ErrorCode::Malformed);
    assert!(a.selection().is_empty());
    assert!(a.focus_records().is_empty());
}

#[test]
fn capability_honesty() {
    let mut a = app(&["core.selection/1", "core.menu/1"]);
    let mut io = Io::new();
    let sent = io.feed(&mut a, MessageType::FocusRequest, "svc-3", &FocusRequest { select: None });
    assert_eq!(error_code(&sent[0]), ErrorCode::NotImplemented);
    let mark = MarkingSet {
        mark_id: "m".into(),
        objects: vec![],
        style: None,
    };
    let sent = io.feed(&mut a, MessageType::MarkingSet, "svc-3", &mark);
    assert_eq!(error_code(&sent[0]), ErrorCode::NotImplemented);
    assert!(a.marks().is_empty());
    // errors are never answered
    let err = ErrorPayload::new(ErrorCode::Gone, "x");
    assert!(io.feed(&mut a, MessageType::Error, BROKER_ID, &err).is_empty());
}

#[test]
fn service_side_messages_are_refused() {
    let mut a = full();
    let mut io = Io::new();
    let inv = MenuInvoke {
        action_id: "x".into(),
        selection: vec![],
        records: vec![],
    };
    let sent = io.feed(&mut a, MessageType::MenuInvoke, "svc-1", &inv);
    assert_eq!(error_code(&sent[0]), ErrorCode::NotImplemented);
}

#[test]
fn marking_set_then_clear_empties_table() {
    let mut a = full();
    let mut io = Io::new();
    let mark = MarkingSet {
        mark_id: "m1".into(),
        objects: vec![t("t1"), t("i1")],
        style: Some("highlight".into()),
    };
    io.feed(&mut a, MessageType::MarkingSet, "svc-1", &mark);
    let (p, _) = io.step(
        &mut a,
        ScriptStep::ExpectMarking {
            matcher: Matcher::EqualsRef,
            mark_id: None,
            objects: vec![RefSpec::Locator("t1".into()), RefSpec::Locator("i1".into())],
        },
    );
    assert_eq!(p, Progress::Done);
    io.feed(&mut a, MessageType::MarkingClear, "svc-1", &MarkingClear { mark_id: "m1".into() });
    assert!(a.marks().is_empty());
    let (p, _) = io.step(
        &mut a,
        ScriptStep::ExpectMarking {
            matcher: Matcher::Absent,
            mark_id: None,
            objects: vec![],
        },
    );
    assert_eq!(p, Progress::Done);
}

#[test]
fn marks_do_not_survive_reconnect() {
    let mut a = full();
    let mut io = Io::new();
    let mark = MarkingSet {
        mark_id: "m1".into(),
        objects: vec![t("t1")],
        style: None,
    };
    io.feed(&mut a, MessageType::MarkingSet, "svc-1", &mark);
    a.reset_session();
    assert!(a.marks().is_empty());
}

#[test]
fn duplicate_window_surfaces_error() {
    let mut a = full();
    let mut io = Io::new();
    assert!(io.feed(&mut a, MessageType::WindowOpen, "svc-2", &window("w1", Renderer::DefinitionView)).is_empty());
    let sent = io.feed(&mut a, MessageType::WindowOpen, "svc-2", &window("w1", Renderer::PlainText));
    assert_eq!(error_code(&sent[0]), ErrorCode::DuplicateWindow);
    assert_eq!(a.windows()["w1"].spec.renderer, Renderer::DefinitionView);
    assert_eq!(a.errors().len(), 1);

    io.feed(&mut a, MessageType::WindowClose, "svc-2", &WindowClose { window_id: "w1".into() });
    assert!(a.windows().is_empty());
    let sent = io.feed(&mut a, MessageType::WindowClose, "svc-2", &WindowClose { window_id: "w1".into() });
    assert_eq!(error_code(&sent[0]), ErrorCode::UnknownWindow);
}

#[test]
fn select_request_menu_and_invoke() {
    let mut a = full();
    let mut io = Io::new();
    let (p, sent) = io.step(
        &mut a,
        ScriptStep::Select {
            objects: vec![RefSpec::Locator("t1".into())],
        },
    );
    assert_eq!(p, Progress::Done);
    assert_eq!(sent[0].kind, MessageType::SelectionChanged);

    let expect_link = ScriptStep::ExpectMenu {
        matcher: Matcher::ContainsLabel,
        label: "Link to concept".into(),
    };
    assert!(matches!(io.step(&mut a, expect_link.clone()).0, Progress::Failed(_)));

    let (_, sent) = io.step(&mut a, ScriptStep::RequestMenu {});
    let req = sent[0].clone();
    assert_eq!(req.kind, MessageType::MenuRequest);
    assert!(req.to.is_none());
    assert!(matches!(io.step(&mut a, expect_link.clone()).0, Progress::Pending(_)));

    // a response to some other request is ignored
    let stray = MenuResponse {
        menu_id: "m0".into(),
        items: vec![],
    };
    let stray = Envelope::new("b-0", BROKER_ID, MessageType::MenuResponse, &stray).unwrap().reply_to("other");
    io.deliver(&mut a, stray);
    assert!(matches!(io.step(&mut a, expect_link.clone()).0, Progress::Pending(_)));

    let resp = MenuResponse {
        menu_id: "m1".into(),
        items: vec![menu_item("svc-1", "Link to concept")],
    };
    let resp = Envelope::new("b-1", BROKER_ID, MessageType::MenuResponse, &resp).unwrap().reply_to(&req.id);
    io.deliver(&mut a, resp);
    assert_eq!(io.step(&mut a, expect_link).0, Progress::Done);
    let absent = ScriptStep::ExpectMenu {
        matcher: Matcher::Absent,
        label: "Get definition".into(),
    };
    assert_eq!(io.step(&mut a, absent).0, Progress::Done);
    let wrong = ScriptStep::ExpectMenu {
        matcher: Matcher::ContainsLabel,
        label: "Get definition".into(),
    };
    assert!(matches!(io.step(&mut a, wrong).0, Progress::Failed(_)));

    let (p, sent) = io.step(
        &mut a,
        ScriptStep::Invoke {
            label: "Link to concept".into(),
        },
    );
    assert_eq!(p, Progress::Done);
    assert_eq!(sent[0].kind, MessageType::MenuInvoke);
    assert_eq!(sent[0].to.as_deref(), Some("svc-1"));
    assert_eq!(sent[0].payload_as::<MenuInvoke>().unwrap().selection, [t("t1")]);
}

#[test]
fn menu_error_fails_expectation() {
    let mut a = full();
    let mut io = Io::new();
    let (_, sent) = io.step(&mut a, ScriptStep::RequestMenu {});
    let err = Envelope::new("b-1", BROKER_ID, MessageType::Error, &ErrorPayload::new(ErrorCode::Internal, "boom"))
        .unwrap()
        .reply_to(&sent[0].id);
    io.deliver(&mut a, err);
    let step = ScriptStep::ExpectMenu {
        matcher: Matcher::Absent,
        label: "x".into(),
    };
    assert!(matches!(io.step(&mut a, step).0, Progress::Failed(_)));
}

#[test]
fn window_expectations_and_events() {
    let mut a = full();
    let mut io = Io::new();
    let expect = ScriptStep::ExpectWindow {
        matcher: Matcher::ContainsLabel,
        renderer: Some(Renderer::DefinitionView),
        label: None,
        data: Some(json!({"definition": "A point."})),
        status: None,
    };
    assert!(matches!(io.step(&mut a, expect.clone()).0, Progress::Pending(_)));
    io.feed(&mut a, MessageType::WindowOpen, "svc-2", &window("w1", Renderer::DefinitionView));
    assert_eq!(io.step(&mut a, expect).0, Progress::Done);
    let wrong_data = ScriptStep::ExpectWindow {
        matcher: Matcher::ContainsLabel,
        renderer: None,
        label: None,
        data: Some(json!({"definition": "Other."})),
        status: None,
    };
    assert!(matches!(io.step(&mut a, wrong_data).0, Progress::Pending(_)));

    let ev = ScriptStep::WindowEvent {
        window_id: None,
        renderer: Some(Renderer::DefinitionView),
        event: "node-clicked".into(),
        data: json!({"conceptUri": "uri:vertex"}),
    };
    let (p, sent) = io.step(&mut a, ev);
    assert_eq!(p, Progress::Done);
    assert_eq!(sent[0].to.as_deref(), Some("svc-2"));
    assert_eq!(sent[0].corr.as_deref(), Some("w1"));

    let status = json!({"windowId": "w1", "event": "status", "data": {"text": "focused calc"}});
    io.feed(&mut a, MessageType::WindowEvent, "svc-2", &status);
    let expect_status = ScriptStep::ExpectWindow {
        matcher: Matcher::ContainsLabel,
        renderer: None,
        label: None,
        data: None,
        status: Some("focused calc".into()),
    };
    assert_eq!(io.step(&mut a, expect_status).0, Progress::Done);
}

#[test]
fn window_event_targets_newest_match() {
    let mut a = full();
    let mut io = Io::new();
    io.feed(&mut a, MessageType::WindowOpen, "svc-2", &window("z-old", Renderer::NavigationGraph));
    io.feed(&mut a, MessageType::WindowOpen, "svc-3", &window("a-new", Renderer::NavigationGraph));
    let ev = ScriptStep::WindowEvent {
        window_id: None,
        renderer: Some(Renderer::NavigationGraph),
        event: "closed".into(),
        data: Value::Null,
    };
    let (_, sent) = io.step(&mut a, ev);
    assert_eq!(sent[0].to.as_deref(), Some("svc-3"));
    assert_eq!(a.windows().keys().collect::<Vec<_>>(), ["z-old"]);
}

#[test]
fn expect_selection_matchers() {
    let mut a = full();
    let mut io = Io::new();
    let absent = ScriptStep::ExpectSelection {
        matcher: Matcher::Absent,
        objects: vec![],
    };
    assert_eq!(io.step(&mut a, absent.clone()).0, Progress::Done);
    io.feed(&mut a, MessageType::SelectionSet, "svc-1", &SelectionSet { objects: vec![t("t2")] });
    assert!(matches!(io.step(&mut a, absent).0, Progress::Pending(_)));
    let eq = ScriptStep::ExpectSelection {
        matcher: Matcher::EqualsRef,
        objects: vec![RefSpec::Full(t("t2"))],
    };
    assert_eq!(io.step(&mut a, eq).0, Progress::Done);
    let bad = ScriptStep::ExpectSelection {
        matcher: Matcher::EqualsRef,
        objects: vec![RefSpec::Locator("nope".into())],
    };
    assert!(matches!(io.step(&mut a, bad).0, Progress::Failed(_)));
}

#[test]
fn report_verdict_follows_steps() {
    let a = full();
    let pass = StepReport {
        index: 1,
        action: "wait".into(),
        verdict: Verdict::Pass,
        detail: String::new(),
        observed: vec![],
    };
    assert!(a.report(vec![pass.clone()]).passed());
    let fail = StepReport {
        index: 2,
        verdict: Verdict::Fail,
        detail: "boom".into(),
        ..pass.clone()
    };
    let r = a.report(vec![pass, fail]);
    assert!(!r.passed());
    assert_eq!(r.first_failure(), Some((2, "boom")));
}

#[test]
fn subset_matching() {
    assert!(subset(&json!({"a": 1}), &json!({"a": 1, "b": 2})));
    assert!(subset(&json!({"a": {"x": 1}}), &json!({"a": {"x": 1, "y": 2}})));
    assert!(!subset(&json!({"a": 2}), &json!({"a": 1})));
    assert!(!subset(&json!([1]), &json!([1, 2])));
}
