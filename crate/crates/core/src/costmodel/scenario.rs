use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Cost, CostError};

/// Component roles that carry a cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ComponentRole {
    /// Service model, M′.
    #[serde(rename = "M'", alias = "model")]
    Model,
    /// Service adapter, A′.
    #[serde(rename = "A'", alias = "adapter")]
    Adapter,
    /// Service view, V′.
    #[serde(rename = "V'", alias = "view")]
    View,
    /// Per-(application, service) plugin, A″.
    #[serde(rename = "A''", alias = "plugin")]
    Plugin,
    /// Application-type API implementation in one application.
    #[serde(rename = "API(T)", alias = "typeApi")]
    TypeApi,
    /// Abstract document model. Accepted for completeness; no strategy
    /// prices it separately.
    #[serde(rename = "ADM", alias = "adm")]
    Adm,
}

impl ComponentRole {
    pub const ALL: [ComponentRole; 6] = [
        ComponentRole::Model,
        ComponentRole::Adapter,
        ComponentRole::View,
        ComponentRole::Plugin,
        ComponentRole::TypeApi,
        ComponentRole::Adm,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AppSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub app_type: Option<String>,
    /// Modules this application is able to implement. Absent means all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub implements: Option<BTreeSet<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ServiceSpec {
    pub name: String,
    #[serde(default)]
    pub service_types: BTreeSet<String>,
}

/// A cost that applies to a narrower context than the role default.
/// Exactly one of `role` and `module` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub app: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<ComponentRole>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub module: Option<String>,
    pub cost: Cost,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModuleAssignment {
    /// service name -> modules its plugin decomposes into
    pub services: BTreeMap<String, BTreeSet<String>>,
    /// module name -> cost of implementing it once in one application
    #[serde(default)]
    pub costs: BTreeMap<String, Cost>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CostScenario {
    pub apps: Vec<AppSpec>,
    pub services: Vec<ServiceSpec>,
    #[serde(default)]
    pub costs: BTreeMap<ComponentRole, Cost>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<CostOverride>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub module_assignment: Option<ModuleAssignment>,
}

const DEFAULT_COST: Cost = Cost::units(1);

impl CostScenario {
    /// `n` applications and `m` services, every cost at one unit.
    pub fn uniform(n: usize, m: usize) -> Self {
        Self {
            apps: (1..=n)
                .map(|i| AppSpec {
                    name: format!("app{i}"),
                    app_type: None,
                    implements: None,
                })
                .collect(),
            services: (1..=m)
                .map(|i| ServiceSpec {
                    name: format!("svc{i}"),
                    service_types: BTreeSet::new(),
                })
                .collect(),
            ..Default::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CostError> {
        let s: CostScenario = serde_json::from_str(text).map_err(|e| CostError::Parse(e.to_string()))?;
        s.check_references()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CostError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| CostError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn n(&self) -> usize {
        self.apps.len()
    }

    pub fn m(&self) -> usize {
        self.services.len()
    }

    /// The model's premise: at least two applications and two services.
    pub fn check_premise(&self) -> Result<(), CostError> {
        if self.n() < 2 || self.m() < 2 {
            return Err(CostError::InvalidScenario(format!(
                "need n >= 2 applications and m >= 2 services, got n = {}, m = {}",
                self.n(),
                self.m()
            )));
        }
        Ok(())
    }

    /// Names must be unique and every override / assignment must point at
    /// something that exists.
    pub fn check_references(&self) -> Result<(), CostError> {
        let apps = unique_names(self.apps.iter().map(|a| a.name.as_str()), "application")?;
        let services = unique_names(self.services.iter().map(|s| s.name.as_str()), "service")?;
        for o in &self.overrides {
            if o.role.is_some() == o.module.is_some() {
                return Err(CostError::InvalidScenario(
                    "an override needs exactly one of `role` and `module`".into(),
                ));
            }
            if let Some(a) = &o.app {
                if !apps.contains(a.as_str()) {
                    return Err(CostError::InvalidScenario(format!("override names unknown app {a:?}")));
                }
            }
            if let Some(s) = &o.service {
                if !services.contains(s.as_str()) {
                    return Err(CostError::InvalidScenario(format!(
                        "override names unknown service {s:?}"
                    )));
                }
            }
        }
        if let Some(ma) = &self.module_assignment {
            for s in ma.services.keys() {
                if !services.contains(s.as_str()) {
                    return Err(CostError::InvalidAssignment(format!(
                        "module assignment names unknown service {s:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Cost of `role` in the context of an (application, service) pair.
    /// The most specific override wins: (app, service), then app, then
    /// service, then the role default (1 unit when omitted).
    pub fn role_cost(&self, role: ComponentRole, app: Option<&str>, service: Option<&str>) -> Cost {
        let pick = |want_app: Option<&str>, want_service: Option<&str>| {
            self.overrides.iter().rev().find(|o| {
                o.role == Some(role) && o.app.as_deref() == want_app && o.service.as_deref() == want_service
            })
        };
        for (a, s) in [(app, service), (app, None), (None, service)] {
            if a.is_none() && s.is_none() {
                continue;
            }
            if let Some(o) = pick(a, s) {
                return o.cost;
            }
        }
        self.costs.get(&role).copied().unwrap_or(DEFAULT_COST)
    }

    /// Cost of implementing `module` once in `app`.
    pub fn module_cost(&self, app: &str, module: &str) -> Cost {
        let specific = self
            .overrides
            .iter()
            .rev()
            .find(|o| o.module.as_deref() == Some(module) && o.app.as_deref() == Some(app));
        if let Some(o) = specific {
            return o.cost;
        }
        self.module_assignment
            .as_ref()
            .and_then(|ma| ma.costs.get(module))
            .copied()
            .unwrap_or(DEFAULT_COST)
    }

    pub fn app_can_implement(&self, app: &AppSpec, module: &str) -> bool {
        app.implements.as_ref().is_none_or(|set| set.contains(module))
    }
}

fn unique_names<'a>(
    names: impl Iterator<Item = &'a str>,
    what: &str,
) -> Result<BTreeSet<&'a str>, CostError> {
    let mut seen = BTreeSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(CostError::InvalidScenario(format!("duplicate {what} name {n:?}")));
        }
    }
    Ok(seen)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_to_one_unit() {
        let s = CostScenario::uniform(2, 2);
        for role in ComponentRole::ALL {
            assert_eq!(s.role_cost(role, Some("app1"), Some("svc1")), Cost::units(1));
        }
        assert_eq!(s.module_cost("app1", "X"), Cost::units(1));
    }

    #[test]
    fn override_precedence() {
        let mut s = CostScenario::uniform(2, 2);
        s.costs.insert(ComponentRole::Plugin, Cost::units(2));
        s.overrides.push(CostOverride {
            app: None,
            service: Some("svc1".into()),
            role: Some(ComponentRole::Plugin),
            module: None,
            cost: Cost::units(3),
        });
        s.overrides.push(CostOverride {
            app: Some("app1".into()),
            service: None,
            role: Some(ComponentRole::Plugin),
            module: None,
            cost: Cost::units(4),
        });
        s.overrides.push(CostOverride {
            app: Some("app1".into()),
            service: Some("svc1".into()),
            role: Some(ComponentRole::Plugin),
            module: None,
            cost: Cost::units(5),
        });
        let c = |a: &str, sv: &str| s.role_cost(ComponentRole::Plugin, Some(a), Some(sv));
        assert_eq!(c("app1", "svc1"), Cost::units(5));
        assert_eq!(c("app1", "svc2"), Cost::units(4));
        assert_eq!(c("app2", "svc1"), Cost::units(3));
        assert_eq!(c("app2", "svc2"), Cost::units(2));
    }

    #[test]
    fn premise_and_references() {
        assert!(CostScenario::uniform(1, 2).check_premise().is_err());
        assert!(CostScenario::uniform(2, 2).check_premise().is_ok());
        let bad = r#"{"apps":[{"name":"a"},{"name":"a"}],"services":[]}"#;
        assert!(matches!(CostScenario::from_json(bad), Err(CostError::InvalidScenario(_))));
        let bad_override = r#"{"apps":[{"name":"a"}],"services":[],
            "overrides":[{"app":"zz","role":"A''","cost":1}]}"#;
        assert!(CostScenario::from_json(bad_override).is_err());
    }

    #[test]
    fn role_names_parse() {
        let s = CostScenario::from_json(
            r#"{"apps":[{"name":"a"}],"services":[{"name":"s"}],
                "costs":{"M'":2,"adapter":3,"V'":0,"A''":4,"API(T)":5,"ADM":6}}"#,
        )
        .unwrap();
        assert_eq!(s.costs[&ComponentRole::Model], Cost::units(2));
        assert_eq!(s.costs[&ComponentRole::Adapter], Cost::units(3));
        assert_eq!(s.costs[&ComponentRole::View], Cost::ZERO);
        assert_eq!(s.costs[&ComponentRole::TypeApi], Cost::units(5));
    }
}
