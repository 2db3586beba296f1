use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::document::{read_file, LoadError};
use crate::protocol::{ObjectRef, Renderer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Matcher {
    ContainsLabel,
    EqualsRef,
    Absent,
}

impl Matcher {
    pub fn as_str(self) -> &'static str {
        match self {
            Matcher::ContainsLabel => "contains-label",
            Matcher::EqualsRef => "equals-ref",
            Matcher::Absent => "absent",
        }
    }
}

fn contains_label() -> Matcher {
    Matcher::ContainsLabel
}

/// An object named either by locator in the app's own document or in full.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RefSpec {
    Locator(String),
    Full(ObjectRef),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ScriptStep {
    Select {
        objects: Vec<RefSpec>,
    },
    RequestMenu {},
    ExpectMenu {
        #[serde(rename = "match")]
        matcher: Matcher,
        label: String,
    },
    /// Invokes the item with `label` from the latest menu response.
    Invoke {
        label: String,
    },
    /// `contains-label`: some open window matches every given filter;
    /// `absent`: none does.
    ExpectWindow {
        #[serde(rename = "match", default = "contains_label")]
        matcher: Matcher,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        renderer: Option<Renderer>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        /// Every key given here must be equal in the window data.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        data: Option<Value>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        status: Option<String>,
    },
    /// Sends an event for the newest open window matching `windowId` or
    /// `renderer`.
    WindowEvent {
        #[serde(default, rename = "windowId", skip_serializing_if = "Option::is_none")]
        window_id: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        renderer: Option<Renderer>,
        event: String,
        #[serde(default)]
        data: Value,
    },
    ExpectSelection {
        #[serde(rename = "match")]
        matcher: Matcher,
        #[serde(default)]
        objects: Vec<RefSpec>,
    },
    ExpectMarking {
        #[serde(rename = "match")]
        matcher: Matcher,
        #[serde(default, rename = "markId", skip_serializing_if = "Option::is_none")]
        mark_id: Option<String>,
        #[serde(default)]
        objects: Vec<RefSpec>,
    },
    Wait {
        ms: u64,
    },
}

impl ScriptStep {
    pub fn action(&self) -> &'static str {
        match self {
            ScriptStep::Select { .. } => "select",
            ScriptStep::RequestMenu {} => "request_menu",
            ScriptStep::ExpectMenu { .. } => "expect_menu",
            ScriptStep::Invoke { .. } => "invoke",
            ScriptStep::ExpectWindow { .. } => "expect_window",
            ScriptStep::WindowEvent { .. } => "window_event",
            ScriptStep::ExpectSelection { .. } => "expect_selection",
            ScriptStep::ExpectMarking { .. } => "expect_marking",
            ScriptStep::Wait { .. } => "wait",
        }
    }

    pub fn is_expectation(&self) -> bool {
        matches!(
            self,
            ScriptStep::ExpectMenu { .. }
                | ScriptStep::ExpectWindow { .. }
                | ScriptStep::ExpectSelection { .. }
                | ScriptStep::ExpectMarking { .. }
        )
    }

    /// Rejects matcher/action combinations that mean nothing.
    pub fn validate(&self) -> Result<(), String> {
        let allowed: &[Matcher] = match self {
            ScriptStep::ExpectMenu { .. } | ScriptStep::ExpectWindow { .. } => {
                &[Matcher::ContainsLabel, Matcher::Absent]
            }
            ScriptStep::ExpectSelection { .. } | ScriptStep::ExpectMarking { .. } => {
                &[Matcher::EqualsRef, Matcher::Absent]
            }
            ScriptStep::WindowEvent { window_id: None, renderer: None, .. } => {
                return Err("window_event needs windowId or renderer".into())
            }
            _ => return Ok(()),
        };
        let m = match self {
            ScriptStep::ExpectMenu { matcher, .. }
            | ScriptStep::ExpectWindow { matcher, .. }
            | ScriptStep::ExpectSelection { matcher, .. }
            | ScriptStep::ExpectMarking { matcher, .. } => *matcher,
            _ => unreachable!(),
        };
        if allowed.contains(&m) {
            Ok(())
        } else {
            Err(format!("{} does not support matcher {}", self.action(), m.as_str()))
        }
    }
}

pub fn parse_script(text: &str) -> Result<Vec<ScriptStep>, LoadError> {
    let steps: Vec<ScriptStep> = serde_json::from_str(text).map_err(|e| LoadError::Parse {
        what: "script",
        reason: e.to_string(),
    })?;
    for (i, s) in steps.iter().enumerate() {
        s.validate().map_err(|e| LoadError::Invalid(format!("step {}: {e}", i + 1)))?;
    }
    Ok(steps)
}

pub fn load_script(path: impl AsRef<Path>) -> Result<Vec<ScriptStep>, LoadError> {
    parse_script(&read_file(path.as_ref())?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Summary of one envelope an app received.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observed {
    #[serde(rename = "type")]
    pub kind: String,
    pub from: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corr: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub index: usize,
    pub action: String,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
    pub observed: Vec<Observed>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FocusRecord {
    pub from: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub select: Option<ObjectRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AppReport {
    pub app: String,
    pub client_id: String,
    pub verdict: Verdict,
    pub steps: Vec<StepReport>,
    pub selection: Vec<ObjectRef>,
    pub focus: Vec<FocusRecord>,
    pub windows: Vec<String>,
    pub marks: Vec<String>,
    pub errors: Vec<String>,
}

impl AppReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// Index (1-based) and detail of the first failing step.
    pub fn first_failure(&self) -> Option<(usize, &str)> {
        self.steps
            .iter()
            .find(|s| s.verdict == Verdict::Fail)
            .map(|s| (s.index, s.detail.as_str()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_action() {
        let steps = parse_script(
            r#"[
            {"action": "select", "objects": ["t1", {"doc": "d", "kind": "image", "locator": "i"}]},
            {"action": "request_menu"},
            {"action": "expect_menu", "match": "contains-label", "label": "Link to concept"},
            {"action": "invoke", "label": "Link to concept"},
            {"action": "expect_window", "renderer": "concept-picker"},
            {"action": "window_event", "renderer": "concept-picker", "event": "picked", "data": {"conceptUri": "uri:vertex"}},
            {"action": "expect_selection", "match": "equals-ref", "objects": ["t1"]},
            {"action": "expect_marking", "match": "absent"},
            {"action": "wait", "ms": 50}
        ]"#,
        )
        .unwrap();
        let actions: Vec<_> = steps.iter().map(ScriptStep::action).collect();
        assert_eq!(
            actions,
            [
                "select",
                "request_menu",
                "expect_menu",
                "invoke",
                "expect_window",
                "window_event",
                "expect_selection",
                "expect_marking",
                "wait"
            ]
        );
        match &steps[0] {
            ScriptStep::Select { objects } => {
                assert_eq!(objects[0], RefSpec::Locator("t1".into()));
                assert!(matches!(objects[1], RefSpec::Full(_)));
            }
            _ => panic!(),
        }
    }

    #[test]
    fn rejects_meaningless_matchers() {
        let err = parse_script(r#"[{"action": "expect_menu", "match": "equals-ref", "label": "x"}]"#);
        assert!(matches!(err, Err(LoadError::Invalid(_))));
        let err = parse_script(r#"[{"action": "window_event", "event": "picked"}]"#);
        assert!(matches!(err, Err(LoadError::Invalid(_))));
        assert!(parse_script(r#"[{"action": "dance"}]"#).is_err());
    }

    #[test]
    fn steps_round_trip() {
        let step = ScriptStep::ExpectWindow {
            matcher: Matcher::Absent,
            renderer: Some(Renderer::DefinitionView),
            label: None,
            data: None,
            status: None,
        };
        let text = serde_json::to_string(&step).unwrap();
        assert_eq!(serde_json::from_str::<ScriptStep>(&text).unwrap(), step);
    }
}
