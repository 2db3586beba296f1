//! Integration cost calculus for comparing strategies of wiring `n`
//! applications to `m` services.
//!
//! Costs are additive over components and kept in integer micro-units, so
//! every total here is an exact sum.

mod money;
mod scenario;
mod strategies;

use thiserror::Error;

pub use money::{Cost, CostParseError};
pub use scenario::{
    AppSpec, ComponentRole, CostOverride, CostScenario, ModuleAssignment, ServiceSpec,
};
pub use strategies::{
    cost_apptype, cost_direct, cost_modular, cost_per_service_modules, cost_standalone, cost_theo,
    modular_breakdown, AppCost, Comparison, ComparisonRow, CostStrategy, StrategyRegistry,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid module assignment: {0}")]
    InvalidAssignment(String),
    #[error("unknown strategy {0:?}")]
    UnknownStrategy(String),
}
