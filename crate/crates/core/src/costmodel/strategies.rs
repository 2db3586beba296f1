//! The integration strategies, each behind [`CostStrategy`] and looked up
//! by name in a [`StrategyRegistry`].

use std::collections::BTreeSet;

use serde::Serialize;

use super::scenario::{ComponentRole, CostScenario};
use super::{Cost, CostError};

use ComponentRole::{Adapter, Model, Plugin, TypeApi, View};

pub trait CostStrategy: Send + Sync {
    fn name(&self) -> &'static str;

    fn summary(&self) -> &'static str;

    /// `Ok(None)` when the scenario lacks the data this strategy needs
    /// (application types, module assignment).
    fn evaluate(&self, scenario: &CostScenario) -> Result<Option<Cost>, CostError>;
}

/// Every service built into every application: model, adapter and view
/// per pair.
pub fn cost_direct(s: &CostScenario) -> Cost {
    pairs(s)
        .map(|(a, sv)| {
            [Model, Adapter, View]
                .into_iter()
                .map(|r| s.role_cost(r, Some(a), Some(sv)))
                .sum::<Cost>()
        })
        .sum()
}

/// Model and adapter moved into one standalone service each; every pair
/// still needs a plugin and a view.
pub fn cost_standalone(s: &CostScenario) -> Cost {
    let per_pair: Cost = pairs(s)
        .map(|(a, sv)| s.role_cost(Plugin, Some(a), Some(sv)) + s.role_cost(View, Some(a), Some(sv)))
        .sum();
    per_pair + standalone_parts(s, &[Adapter, Model])
}

/// As standalone, with the view served by the generic screen manager.
pub fn cost_theo(s: &CostScenario) -> Cost {
    let per_pair: Cost = pairs(s)
        .map(|(a, sv)| s.role_cost(Plugin, Some(a), Some(sv)))
        .sum();
    per_pair + standalone_parts(s, &[Adapter, Model, View])
}

/// One API per application type, implemented once per application of that
/// type; each service priced once per type it targets. `None` unless every
/// application has a type and every service targets at least one.
pub fn cost_apptype(s: &CostScenario) -> Option<Cost> {
    if s.apps.iter().any(|a| a.app_type.is_none()) || s.services.iter().any(|sv| sv.service_types.is_empty()) {
        return None;
    }
    let types: BTreeSet<&str> = s
        .apps
        .iter()
        .filter_map(|a| a.app_type.as_deref())
        .chain(s.services.iter().flat_map(|sv| sv.service_types.iter().map(String::as_str)))
        .collect();
    let total = types
        .into_iter()
        .map(|t| {
            let apis: Cost = s
                .apps
                .iter()
                .filter(|a| a.app_type.as_deref() == Some(t))
                .map(|a| s.role_cost(TypeApi, Some(&a.name), None))
                .sum();
            let services: Cost = s
                .services
                .iter()
                .filter(|sv| sv.service_types.contains(t))
                .map(|sv| {
                    [Adapter, Model, View]
                        .into_iter()
                        .map(|r| s.role_cost(r, None, Some(&sv.name)))
                        .sum::<Cost>()
                })
                .sum();
            apis + services
        })
        .sum();
    Some(total)
}

/// Each application implements every distinct module once, no matter how
/// many services reuse it.
pub fn cost_modular(s: &CostScenario) -> Result<Cost, CostError> {
    Ok(modular_breakdown(s)?.into_iter().map(|(_, c)| c).sum())
}

/// Per-application share of [`cost_modular`].
pub fn modular_breakdown(s: &CostScenario) -> Result<Vec<(String, Cost)>, CostError> {
    let modules = module_union(s)?;
    Ok(s.apps
        .iter()
        .map(|a| {
            let c = modules
                .iter()
                .filter(|m| s.app_can_implement(a, m))
                .map(|m| s.module_cost(&a.name, m))
                .sum();
            (a.name.clone(), c)
        })
        .collect())
}

/// The per-pair plugin cost with every plugin decomposed into its modules
/// but without removing duplicates: what [`cost_modular`] saves against.
pub fn cost_per_service_modules(s: &CostScenario) -> Result<Cost, CostError> {
    module_union(s)?;
    let ma = s.module_assignment.as_ref().expect("checked by module_union");
    Ok(s.apps
        .iter()
        .flat_map(|a| {
            s.services.iter().flat_map(move |sv| {
                ma.services[&sv.name]
                    .iter()
                    .filter(move |m| s.app_can_implement(a, m))
                    .map(move |m| s.module_cost(&a.name, m))
            })
        })
        .sum())
}

fn module_union(s: &CostScenario) -> Result<BTreeSet<&str>, CostError> {
    let ma = s
        .module_assignment
        .as_ref()
        .ok_or_else(|| CostError::InvalidAssignment("scenario has no module assignment".into()))?;
    let mut union = BTreeSet::new();
    for sv in &s.services {
        match ma.services.get(&sv.name) {
            None => {
                return Err(CostError::InvalidAssignment(format!(
                    "service {:?} has no module assignment",
                    sv.name
                )))
            }
            Some(set) if set.is_empty() => {
                return Err(CostError::InvalidAssignment(format!(
                    "service {:?} is assigned no modules",
                    sv.name
                )))
            }
            Some(set) => union.extend(set.iter().map(String::as_str)),
        }
    }
    Ok(union)
}

fn pairs(s: &CostScenario) -> impl Iterator<Item = (&str, &str)> {
    s.apps
        .iter()
        .flat_map(move |a| s.services.iter().map(move |sv| (a.name.as_str(), sv.name.as_str())))
}

fn standalone_parts(s: &CostScenario, roles: &[ComponentRole]) -> Cost {
    s.services
        .iter()
        .flat_map(|sv| roles.iter().map(move |r| s.role_cost(*r, None, Some(&sv.name))))
        .sum()
}

struct Direct;
struct Standalone;
struct Theo;
struct AppType;
struct Modular;

impl CostStrategy for Direct {
    fn name(&self) -> &'static str {
        "direct"
    }
    fn summary(&self) -> &'static str {
        "every service built into every application"
    }
    fn evaluate(&self, s: &CostScenario) -> Result<Option<Cost>, CostError> {
        Ok(Some(cost_direct(s)))
    }
}

impl CostStrategy for Standalone {
    fn name(&self) -> &'static str {
        "standalone"
    }
    fn summary(&self) -> &'static str {
        "standalone service model and adapter, per-application plugin and view"
    }
    fn evaluate(&self, s: &CostScenario) -> Result<Option<Cost>, CostError> {
        Ok(Some(cost_standalone(s)))
    }
}

impl CostStrategy for Theo {
    fn name(&self) -> &'static str {
        "theo"
    }
    fn summary(&self) -> &'static str {
        "standalone service with views rendered by a generic screen manager"
    }
    fn evaluate(&self, s: &CostScenario) -> Result<Option<Cost>, CostError> {
        Ok(Some(cost_theo(s)))
    }
}

impl CostStrategy for AppType {
    fn name(&self) -> &'static str {
        "apptype"
    }
    fn summary(&self) -> &'static str {
        "one plugin API per application type"
    }
    fn evaluate(&self, s: &CostScenario) -> Result<Option<Cost>, CostError> {
        Ok(cost_apptype(s))
    }
}

impl CostStrategy for Modular {
    fn name(&self) -> &'static str {
        "modular"
    }
    fn summary(&self) -> &'static str {
        "reusable interaction modules implemented once per application"
    }
    fn evaluate(&self, s: &CostScenario) -> Result<Option<Cost>, CostError> {
        if s.module_assignment.is_none() {
            return Ok(None);
        }
        cost_modular(s).map(Some)
    }
}

pub struct StrategyRegistry {
    strategies: Vec<Box<dyn CostStrategy>>,
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        Self::standard()
    }
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        Self { strategies: Vec::new() }
    }

    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(Direct));
        r.register(Box::new(Standalone));
        r.register(Box::new(Theo));
        r.register(Box::new(AppType));
        r.register(Box::new(Modular));
        r
    }

    /// Adds a strategy, replacing any existing one with the same name.
    pub fn register(&mut self, strategy: Box<dyn CostStrategy>) {
        self.strategies.retain(|s| s.name() != strategy.name());
        self.strategies.push(strategy);
    }

    pub fn get(&self, name: &str) -> Option<&dyn CostStrategy> {
        self.strategies.iter().find(|s| s.name() == name).map(|b| b.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.strategies.iter().map(|s| s.name()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn CostStrategy> {
        self.strategies.iter().map(|b| b.as_ref())
    }

    /// Evaluates the named strategies (all when `only` is empty) and sorts
    /// the rows by cost, then name.
    pub fn compare(&self, s: &CostScenario, only: &[String]) -> Result<Comparison, CostError> {
        for name in only {
            if self.get(name).is_none() {
                return Err(CostError::UnknownStrategy(name.clone()));
            }
        }
        let mut rows = Vec::new();
        for strategy in self.iter() {
            if !only.is_empty() && !only.iter().any(|n| n == strategy.name()) {
                continue;
            }
            if let Some(cost) = strategy.evaluate(s)? {
                rows.push(ComparisonRow {
                    strategy: strategy.name().to_string(),
                    cost,
                });
            }
        }
        rows.sort_by(|a, b| a.cost.cmp(&b.cost).then_with(|| a.strategy.cmp(&b.strategy)));
        let modular_per_app = if s.module_assignment.is_some() && rows.iter().any(|r| r.strategy == "modular") {
            modular_breakdown(s)?
                .into_iter()
                .map(|(app, cost)| AppCost { app, cost })
                .collect()
        } else {
            Vec::new()
        };
        Ok(Comparison { rows, modular_per_app })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub strategy: String,
    pub cost: Cost,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppCost {
    pub app: String,
    pub cost: Cost,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub modular_per_app: Vec<AppCost>,
}

impl Comparison {
    pub fn cost_of(&self, strategy: &str) -> Option<Cost> {
        self.rows.iter().find(|r| r.strategy == strategy).map(|r| r.cost)
    }

    pub fn render_table(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.strategy.len())
            .chain(self.modular_per_app.iter().map(|a| a.app.len() + 2))
            .max()
            .unwrap_or(0)
            .max("strategy".len());
        let mut out = format!("{:<width$}  cost\n", "strategy");
        for r in &self.rows {
            out.push_str(&format!("{:<width$}  {}\n", r.strategy, r.cost));
        }
        if !self.modular_per_app.is_empty() {
            out.push_str("\nmodular, per application\n");
            for a in &self.modular_per_app {
                out.push_str(&format!("{:<width$}  {}\n", format!("  {}", a.app), a.cost));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costmodel::scenario::{AppSpec, ModuleAssignment};
    use std::collections::BTreeMap;

    fn assign(s: &mut CostScenario, modules: &[&[&str]]) {
        let services = s
            .services
            .iter()
            .zip(modules)
            .map(|(sv, ms)| (sv.name.clone(), ms.iter().map(|m| m.to_string()).collect()))
            .collect();
        s.module_assignment = Some(ModuleAssignment {
            services,
            costs: BTreeMap::new(),
        });
    }

    #[test]
    fn direct_examples() {
        assert_eq!(cost_direct(&CostScenario::uniform(2, 2)), Cost::units(12));
        assert_eq!(cost_direct(&CostScenario::uniform(3, 4)), Cost::units(36));
        let mut zero = CostScenario::uniform(3, 3);
        for r in ComponentRole::ALL {
            zero.costs.insert(r, Cost::ZERO);
        }
        assert_eq!(cost_direct(&zero), Cost::ZERO);
        assert_eq!(cost_standalone(&zero), Cost::ZERO);
        assert_eq!(cost_theo(&zero), Cost::ZERO);
    }

    #[test]
    fn standalone_examples() {
        assert_eq!(cost_standalone(&CostScenario::uniform(2, 2)), Cost::units(12));
        assert_eq!(cost_standalone(&CostScenario::uniform(3, 4)), Cost::units(32));
        let mut headless = CostScenario::uniform(2, 2);
        headless.costs.insert(View, Cost::ZERO);
        assert_eq!(cost_standalone(&headless), Cost::units(8));
    }

    #[test]
    fn theo_examples() {
        assert_eq!(cost_theo(&CostScenario::uniform(2, 2)), Cost::units(10));
        assert_eq!(cost_theo(&CostScenario::uniform(3, 4)), Cost::units(24));
        for n in 1..6 {
            for m in 1..6 {
                let s = CostScenario::uniform(n, m);
                assert!(cost_theo(&s) <= cost_standalone(&s));
            }
        }
    }

    fn typed(n_types: &[(&str, usize, usize)]) -> CostScenario {
        let mut s = CostScenario::default();
        for (t, apps, services) in n_types {
            for i in 0..*apps {
                s.apps.push(AppSpec {
                    name: format!("{t}-app{i}"),
                    app_type: Some(t.to_string()),
                    implements: None,
                });
            }
            for i in 0..*services {
                s.services.push(crate::costmodel::ServiceSpec {
                    name: format!("{t}-svc{i}"),
                    service_types: [t.to_string()].into(),
                });
            }
        }
        s
    }

    #[test]
    fn apptype_examples() {
        assert_eq!(cost_apptype(&typed(&[("sheet", 2, 2)])), Some(Cost::units(8)));
        assert_eq!(cost_apptype(&typed(&[("sheet", 1, 1), ("cad", 1, 1)])), Some(Cost::units(8)));
        let mut rich = typed(&[("sheet", 2, 2)]);
        rich.costs.insert(TypeApi, Cost::units(5));
        assert_eq!(cost_apptype(&rich), Some(Cost::units(16)));
        assert_eq!(cost_apptype(&CostScenario::uniform(2, 2)), None);
    }

    #[test]
    fn apptype_service_without_apps_counts_once() {
        let mut s = typed(&[("sheet", 2, 2)]);
        s.services[0].service_types.insert("cad".into());
        // sheet: 2 + 6, cad: 0 apps + 3
        assert_eq!(cost_apptype(&s), Some(Cost::units(11)));
    }

    #[test]
    fn modular_examples() {
        let mut shared = CostScenario::uniform(2, 2);
        assign(&mut shared, &[&["X"], &["X"]]);
        assert_eq!(cost_modular(&shared).unwrap(), Cost::units(2));
        assert_eq!(cost_per_service_modules(&shared).unwrap() - cost_modular(&shared).unwrap(), Cost::units(2));

        let mut disjoint = CostScenario::uniform(2, 2);
        assign(&mut disjoint, &[&["X1"], &["X2"]]);
        assert_eq!(cost_modular(&disjoint).unwrap(), Cost::units(4));
        // no reuse: equals the plugin sum with one unit per plugin
        let plugin_sum: Cost = pairs(&disjoint)
            .map(|(a, s)| disjoint.role_cost(Plugin, Some(a), Some(s)))
            .sum();
        assert_eq!(cost_modular(&disjoint).unwrap(), plugin_sum);
    }

    #[test]
    fn modular_rejects_bad_assignment() {
        let mut s = CostScenario::uniform(2, 2);
        assert!(matches!(cost_modular(&s), Err(CostError::InvalidAssignment(_))));
        assign(&mut s, &[&["X"], &[]]);
        assert!(matches!(cost_modular(&s), Err(CostError::InvalidAssignment(_))));
        s.module_assignment.as_mut().unwrap().services.remove("svc2");
        assert!(matches!(cost_modular(&s), Err(CostError::InvalidAssignment(_))));
    }

    #[test]
    fn compare_unit_shared_module() {
        let mut s = typed(&[("text", 2, 2)]);
        let names: Vec<String> = s.services.iter().map(|x| x.name.clone()).collect();
        s.module_assignment = Some(ModuleAssignment {
            services: names.iter().map(|n| (n.clone(), ["X".to_string()].into())).collect(),
            costs: BTreeMap::new(),
        });
        let cmp = StrategyRegistry::standard().compare(&s, &[]).unwrap();
        let order: Vec<&str> = cmp.rows.iter().map(|r| r.strategy.as_str()).collect();
        assert_eq!(order, ["modular", "apptype", "theo", "direct", "standalone"]);
        assert_eq!(cmp.cost_of("modular"), Some(Cost::units(2)));
        assert_eq!(cmp.cost_of("apptype"), Some(Cost::units(8)));
        assert_eq!(cmp.cost_of("direct"), Some(Cost::units(12)));
        assert_eq!(cmp.cost_of("standalone"), Some(Cost::units(12)));
    }

    #[test]
    fn compare_zero_costs_ties_by_name() {
        let mut s = typed(&[("text", 2, 2)]);
        for r in ComponentRole::ALL {
            s.costs.insert(r, Cost::ZERO);
        }
        let cmp = StrategyRegistry::standard().compare(&s, &[]).unwrap();
        let order: Vec<&str> = cmp.rows.iter().map(|r| r.strategy.as_str()).collect();
        assert_eq!(order, ["apptype", "direct", "standalone", "theo"]);
        assert!(cmp.rows.iter().all(|r| r.cost == Cost::ZERO));
    }

    #[test]
    fn compare_omits_inapplicable_rows_and_rejects_unknown_names() {
        let s = CostScenario::uniform(2, 2);
        let reg = StrategyRegistry::standard();
        let cmp = reg.compare(&s, &[]).unwrap();
        assert_eq!(cmp.rows.len(), 3);
        assert!(matches!(
            reg.compare(&s, &["fastest".to_string()]),
            Err(CostError::UnknownStrategy(_))
        ));
        let only = reg.compare(&s, &["theo".to_string()]).unwrap();
        assert_eq!(only.rows.len(), 1);
    }

    #[test]
    fn registry_replaces_by_name() {
        struct Flat;
        impl CostStrategy for Flat {
            fn name(&self) -> &'static str {
                "direct"
            }
            fn summary(&self) -> &'static str {
                "flat"
            }
            fn evaluate(&self, _: &CostScenario) -> Result<Option<Cost>, CostError> {
                Ok(Some(Cost::units(1)))
            }
        }
        let mut reg = StrategyRegistry::standard();
        reg.register(Box::new(Flat));
        assert_eq!(reg.names().len(), 5);
        assert_eq!(
            reg.get("direct").unwrap().evaluate(&CostScenario::uniform(2, 2)).unwrap(),
            Some(Cost::units(1))
        );
    }

    #[test]
    fn table_rendering() {
        let cmp = StrategyRegistry::standard()
            .compare(&CostScenario::uniform(2, 2), &[])
            .unwrap();
        let table = cmp.render_table();
        assert!(table.starts_with("strategy    cost\ntheo        10\n"), "{table}");
    }
}
