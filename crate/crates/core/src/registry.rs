//! Module interface descriptors, application capabilities and service
//! requirements, and the integration matrix derived from them.
//!
//! A service `s` integrates with an application `a` when every module `s`
//! requires is among `a`'s *effective* capabilities: the modules `a`
//! implements, closed under middleware-hosted modules whose requirements are
//! already met (a hosted module contributes its own id and everything it
//! provides).

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::ModuleInterfaceId;

type Id = ModuleInterfaceId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegistryError {
    #[error("dependency cycle: {}", format_path(.0))]
    CycleDetected(Vec<Id>),
    #[error("module {0} is already registered")]
    DuplicateId(Id),
    #[error("module {module} depends on unregistered {dependency}")]
    UnknownDependency { module: Id, dependency: Id },
    #[error("unknown module {0}")]
    UnknownModule(Id),
    #[error("invalid descriptor {0}: {1}")]
    InvalidDescriptor(Id, String),
    #[error("client id {0:?} is already registered")]
    DuplicateClient(String),
    #[error("cannot read module file: {0}")]
    Load(String),
}

fn format_path(path: &[Id]) -> String {
    path.iter().map(ToString::to_string).collect::<Vec<_>>().join(" -> ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleDescriptor {
    pub id: Id,
    /// For hosted modules this is the set the module requires before the
    /// middleware can offer it.
    #[serde(default, alias = "requires")]
    pub dependencies: BTreeSet<Id>,
    #[serde(default)]
    pub hosted: bool,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub provides: BTreeSet<Id>,
}

impl ModuleDescriptor {
    pub fn base(id: Id, dependencies: impl IntoIterator<Item = Id>) -> Self {
        Self {
            id,
            dependencies: dependencies.into_iter().collect(),
            hosted: false,
            provides: BTreeSet::new(),
        }
    }

    pub fn hosted(
        id: Id,
        requires: impl IntoIterator<Item = Id>,
        provides: impl IntoIterator<Item = Id>,
    ) -> Self {
        Self {
            id,
            dependencies: requires.into_iter().collect(),
            hosted: true,
            provides: provides.into_iter().collect(),
        }
    }

    pub fn requires(&self) -> &BTreeSet<Id> {
        &self.dependencies
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ApplicationRegistration {
    pub client_id: String,
    pub name: String,
    pub implements: BTreeSet<Id>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ServiceRegistration {
    pub client_id: String,
    pub name: String,
    pub requires: BTreeSet<Id>,
}

/// `(service, application) -> integrable` over every live pair.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IntegrationMatrix {
    entries: BTreeMap<(String, String), bool>,
}

impl IntegrationMatrix {
    pub fn get(&self, service: &str, app: &str) -> Option<bool> {
        self.entries
            .get(&(service.to_string(), app.to_string()))
            .copied()
    }

    pub fn is_integrated(&self, service: &str, app: &str) -> bool {
        self.get(service, app).unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str, bool)> {
        self.entries
            .iter()
            .map(|((s, a), v)| (s.as_str(), a.as_str(), *v))
    }

    pub fn apps_for(&self, service: &str) -> Vec<String> {
        self.entries
            .iter()
            .filter(|((s, _), v)| s == service && **v)
            .map(|((_, a), _)| a.clone())
            .collect()
    }

    pub fn services_for(&self, app: &str) -> Vec<String> {
        self.entries
            .iter()
            .filter(|((_, a), v)| a == app && **v)
            .map(|((s, _), _)| s.clone())
            .collect()
    }

    pub fn mentions(&self, client_id: &str) -> bool {
        self.entries.keys().any(|(s, a)| s == client_id || a == client_id)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Registry {
    modules: BTreeMap<Id, ModuleDescriptor>,
    apps: BTreeMap<String, ApplicationRegistration>,
    services: BTreeMap<String, ServiceRegistration>,
    matrix: IntegrationMatrix,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_modules(
        modules: impl IntoIterator<Item = ModuleDescriptor>,
    ) -> Result<Self, RegistryError> {
        let mut registry = Self::new();
        registry.register_modules(modules)?;
        Ok(registry)
    }

    pub fn register_module(&mut self, d: ModuleDescriptor) -> Result<(), RegistryError> {
        self.register_modules([d])
    }

    /// Registers a batch atomically. Descriptors may reference ids that
    /// appear later in the same batch; anything else must already be
    /// registered.
    pub fn register_modules(
        &mut self,
        batch: impl IntoIterator<Item = ModuleDescriptor>,
    ) -> Result<(), RegistryError> {
        let batch: Vec<ModuleDescriptor> = batch.into_iter().collect();
        let batch_ids: BTreeSet<&Id> = batch.iter().map(|d| &d.id).collect();
        let mut staged = self.modules.clone();
        for d in &batch {
            if staged.contains_key(&d.id) {
                return Err(RegistryError::DuplicateId(d.id.clone()));
            }
            if !d.hosted && !d.provides.is_empty() {
                return Err(RegistryError::InvalidDescriptor(
                    d.id.clone(),
                    "only hosted modules may provide other interfaces".into(),
                ));
            }
            for dep in d.dependencies.iter().chain(&d.provides) {
                if dep != &d.id && !staged.contains_key(dep) && !batch_ids.contains(dep) {
                    return Err(RegistryError::UnknownDependency {
                        module: d.id.clone(),
                        dependency: dep.clone(),
                    });
                }
            }
            let hosted_target = d.provides.iter().find(|p| {
                staged.get(*p).map(|m| m.hosted).unwrap_or_else(|| batch.iter().any(|b| &b.id == *p && b.hosted))
            });
            if let Some(p) = hosted_target {
                return Err(RegistryError::InvalidDescriptor(
                    d.id.clone(),
                    format!("cannot provide hosted module {p}"),
                ));
            }
            staged.insert(d.id.clone(), d.clone());
            if let Some(cycle) = find_cycle_through(&staged, &d.id) {
                return Err(RegistryError::CycleDetected(cycle));
            }
        }
        self.modules = staged;
        self.recompute();
        Ok(())
    }

    pub fn modules(&self) -> impl Iterator<Item = &ModuleDescriptor> {
        self.modules.values()
    }

    pub fn module(&self, id: &Id) -> Option<&ModuleDescriptor> {
        self.modules.get(id)
    }

    pub fn contains_module(&self, id: &Id) -> bool {
        self.modules.contains_key(id)
    }

    /// Kahn order over the dependency graph, dependencies first.
    /// `None` would mean a cycle slipped in.
    pub fn topological_order(&self) -> Option<Vec<Id>> {
        let mut indegree: BTreeMap<&Id, usize> = self.modules.keys().map(|k| (k, 0)).collect();
        let adjacency = successors(&self.modules);
        for targets in adjacency.values() {
            for t in targets {
                *indegree.entry(t).or_default() += 1;
            }
        }
        let mut ready: Vec<&Id> = indegree
            .iter()
            .filter(|(_, n)| **n == 0)
            .map(|(k, _)| *k)
            .collect();
        let mut order = Vec::with_capacity(indegree.len());
        while let Some(node) = ready.pop() {
            order.push(node.clone());
            for next in adjacency.get(node).into_iter().flatten() {
                let n = indegree.get_mut(next).expect("node indexed");
                *n -= 1;
                if *n == 0 {
                    ready.push(next);
                }
            }
        }
        // Edges point from dependent to dependency; flip for "dependencies first".
        order.reverse();
        (order.len() == indegree.len()).then_some(order)
    }

    /// Least fixpoint of the implemented set under hosted modules.
    pub fn effective_of(&self, implements: &BTreeSet<Id>) -> BTreeSet<Id> {
        let hosted: Vec<&ModuleDescriptor> = self.modules.values().filter(|d| d.hosted).collect();
        let mut effective = implements.clone();
        loop {
            let mut changed = false;
            for h in &hosted {
                if h.requires().is_subset(&effective) {
                    changed |= effective.insert(h.id.clone());
                    for p in &h.provides {
                        changed |= effective.insert(p.clone());
                    }
                }
            }
            if !changed {
                return effective;
            }
        }
    }

    pub fn effective_capabilities(&self, app: &ApplicationRegistration) -> BTreeSet<Id> {
        self.effective_of(&app.implements)
    }

    pub fn can_integrate(&self, s: &ServiceRegistration, a: &ApplicationRegistration) -> bool {
        s.requires.is_subset(&self.effective_capabilities(a))
    }

    fn check_known(&self, ids: &BTreeSet<Id>) -> Result<(), RegistryError> {
        match ids.iter().find(|id| !self.modules.contains_key(*id)) {
            Some(unknown) => Err(RegistryError::UnknownModule(unknown.clone())),
            None => Ok(()),
        }
    }

    fn check_fresh_client(&self, client_id: &str) -> Result<(), RegistryError> {
        if self.apps.contains_key(client_id) || self.services.contains_key(client_id) {
            return Err(RegistryError::DuplicateClient(client_id.to_string()));
        }
        Ok(())
    }

    pub fn register_application(&mut self, a: ApplicationRegistration) -> Result<(), RegistryError> {
        self.check_fresh_client(&a.client_id)?;
        self.check_known(&a.implements)?;
        self.apps.insert(a.client_id.clone(), a);
        self.recompute();
        Ok(())
    }

    pub fn register_service(&mut self, s: ServiceRegistration) -> Result<(), RegistryError> {
        self.check_fresh_client(&s.client_id)?;
        self.check_known(&s.requires)?;
        self.services.insert(s.client_id.clone(), s);
        self.recompute();
        Ok(())
    }

    /// Replaces an application's implemented set (used when an application
    /// gains capabilities at runtime).
    pub fn update_application(
        &mut self,
        client_id: &str,
        implements: BTreeSet<Id>,
    ) -> Result<(), RegistryError> {
        self.check_known(&implements)?;
        if let Some(app) = self.apps.get_mut(client_id) {
            app.implements = implements;
            self.recompute();
        }
        Ok(())
    }

    /// Removes an application or service. Returns whether it was known.
    pub fn deregister(&mut self, client_id: &str) -> bool {
        let removed = self.apps.remove(client_id).is_some() | self.services.remove(client_id).is_some();
        if removed {
            self.recompute();
        }
        removed
    }

    pub fn application(&self, client_id: &str) -> Option<&ApplicationRegistration> {
        self.apps.get(client_id)
    }

    pub fn service(&self, client_id: &str) -> Option<&ServiceRegistration> {
        self.services.get(client_id)
    }

    pub fn applications(&self) -> impl Iterator<Item = &ApplicationRegistration> {
        self.apps.values()
    }

    pub fn services(&self) -> impl Iterator<Item = &ServiceRegistration> {
        self.services.values()
    }

    pub fn integration_matrix(&self) -> &IntegrationMatrix {
        &self.matrix
    }

    fn recompute(&mut self) {
        let mut entries = BTreeMap::new();
        for a in self.apps.values() {
            let effective = self.effective_capabilities(a);
            for s in self.services.values() {
                entries.insert(
                    (s.client_id.clone(), a.client_id.clone()),
                    s.requires.is_subset(&effective),
                );
            }
        }
        self.matrix = IntegrationMatrix { entries };
    }
}

/// Out-edges of the combined graph: every module points at its
/// dependencies, and every provided id points at the hosted module that
/// provides it.
fn successors(modules: &BTreeMap<Id, ModuleDescriptor>) -> BTreeMap<&Id, BTreeSet<&Id>> {
    let mut out: BTreeMap<&Id, BTreeSet<&Id>> = BTreeMap::new();
    for d in modules.values() {
        out.entry(&d.id).or_default().extend(d.dependencies.iter());
        for p in &d.provides {
            out.entry(p).or_default().insert(&d.id);
        }
    }
    out
}

/// Searches for a cycle that passes through `start`, returning it as a
/// closed path rotated to begin at its smallest id.
fn find_cycle_through(modules: &BTreeMap<Id, ModuleDescriptor>, start: &Id) -> Option<Vec<Id>> {
    let adjacency = successors(modules);
    let mut path: Vec<&Id> = vec![start];
    let mut visited: BTreeSet<&Id> = BTreeSet::new();
    let mut stack: Vec<std::collections::btree_set::Iter<'_, &Id>> = Vec::new();
    let empty = BTreeSet::new();
    stack.push(adjacency.get(start).unwrap_or(&empty).iter());
    visited.insert(start);

    while let Some(iter) = stack.last_mut() {
        match iter.next() {
            Some(next) if *next == start => {
                let mut cycle: Vec<Id> = path.iter().map(|id| (*id).clone()).collect();
                return Some(canonical_cycle(&mut cycle));
            }
            Some(next) => {
                if visited.insert(next) {
                    path.push(next);
                    stack.push(adjacency.get(next).unwrap_or(&empty).iter());
                }
            }
            None => {
                stack.pop();
                path.pop();
            }
        }
    }
    None
}

fn canonical_cycle(cycle: &mut [Id]) -> Vec<Id> {
    let min_at = cycle
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    cycle.rotate_left(min_at);
    let mut closed = cycle.to_vec();
    closed.push(cycle[0].clone());
    closed
}

/// Reads a JSON list of descriptors.
pub fn load_module_file(path: impl AsRef<Path>) -> Result<Vec<ModuleDescriptor>, RegistryError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| RegistryError::Load(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| RegistryError::Load(format!("{}: {e}", path.display())))
}
