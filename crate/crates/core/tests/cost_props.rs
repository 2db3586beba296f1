use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use sally_core::costmodel::{
    cost_direct, cost_modular, cost_per_service_modules, cost_standalone, cost_theo, ComponentRole, Cost,
    CostScenario, ModuleAssignment,
};

use ComponentRole::{Adapter, Model, Plugin, View};

/// One materialized component: role plus the (app, service) it belongs to.
type Component = (ComponentRole, Option<usize>, Option<usize>);

fn per_pair(n: usize, m: usize, roles: &[ComponentRole]) -> Vec<Component> {
    let mut out = Vec::new();
    for a in 0..n {
        for s in 0..m {
            for r in roles {
                out.push((*r, Some(a), Some(s)));
            }
        }
    }
    out
}

fn per_service(m: usize, roles: &[ComponentRole]) -> Vec<Component> {
    (0..m).flat_map(|s| roles.iter().map(move |r| (*r, None, Some(s)))).collect()
}

fn price(components: &[Component], costs: &BTreeMap<ComponentRole, i64>) -> i64 {
    components.iter().map(|(r, _, _)| costs.get(r).copied().unwrap_or(1_000_000)).sum()
}

fn scenario(n: usize, m: usize, costs: &BTreeMap<ComponentRole, i64>) -> CostScenario {
    let mut s = CostScenario::uniform(n, m);
    for (r, c) in costs {
        s.costs.insert(*r, Cost::from_micros(*c));
    }
    s
}

fn role_costs() -> impl Strategy<Value = BTreeMap<ComponentRole, i64>> {
    prop::collection::vec(0i64..100_000_000, 4).prop_map(|v| {
        [Model, Adapter, View, Plugin].into_iter().zip(v).collect()
    })
}

#[test]
fn unit_costs_match_the_closed_forms() {
    let unit = BTreeMap::new();
    for n in 1..=8 {
        for m in 1..=8 {
            let s = CostScenario::uniform(n, m);
            let (n_, m_) = (n as i64, m as i64);
            assert_eq!(cost_direct(&s), Cost::units(3 * n_ * m_));
            assert_eq!(cost_standalone(&s), Cost::units(2 * n_ * m_ + 2 * m_));
            assert_eq!(cost_theo(&s), Cost::units(n_ * m_ + 3 * m_));

            let direct = per_pair(n, m, &[Model, Adapter, View]);
            assert_eq!(direct.len(), 3 * n * m);
            assert_eq!(cost_direct(&s).micros(), price(&direct, &unit));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn strategies_match_the_enumerator(n in 1usize..8, m in 1usize..8, costs in role_costs()) {
        let s = scenario(n, m, &costs);
        let direct = per_pair(n, m, &[Model, Adapter, View]);
        let mut standalone = per_pair(n, m, &[Plugin, View]);
        standalone.extend(per_service(m, &[Model, Adapter]));
        let mut theo = per_pair(n, m, &[Plugin]);
        theo.extend(per_service(m, &[Model, Adapter, View]));
        prop_assert_eq!(cost_direct(&s).micros(), price(&direct, &costs));
        prop_assert_eq!(cost_standalone(&s).micros(), price(&standalone, &costs));
        prop_assert_eq!(cost_theo(&s).micros(), price(&theo, &costs));
    }

    #[test]
    fn direct_is_additive_over_applications(a in 1usize..6, b in 1usize..6, m in 1usize..6, costs in role_costs()) {
        let whole = cost_direct(&scenario(a + b, m, &costs));
        prop_assert_eq!(whole, cost_direct(&scenario(a, m, &costs)) + cost_direct(&scenario(b, m, &costs)));
    }

    #[test]
    fn theo_never_costs_more_than_standalone(n in 1usize..8, m in 1usize..8, costs in role_costs()) {
        let s = scenario(n, m, &costs);
        prop_assert!(cost_theo(&s) <= cost_standalone(&s));
    }

    #[test]
    fn theo_beats_direct_at_unit_cost(n in 2usize..10, m in 1usize..10) {
        let s = CostScenario::uniform(n, m);
        prop_assert!(cost_theo(&s) < cost_direct(&s));
    }

    /// Each module shared by k services is paid n(k-1) times too often
    /// when every plugin is built separately.
    #[test]
    fn modular_saving_counts_shared_modules(
        n in 1usize..6,
        assignment in prop::collection::vec(prop::collection::btree_set(0usize..6, 1..4), 1..6),
        module_costs in prop::collection::vec(0i64..100, 6),
    ) {
        let m = assignment.len();
        let mut s = CostScenario::uniform(n, m);
        let mut ma = ModuleAssignment::default();
        for (i, mods) in assignment.iter().enumerate() {
            ma.services.insert(format!("svc{}", i + 1), mods.iter().map(|x| format!("mod{x}")).collect());
        }
        for (x, c) in module_costs.iter().enumerate() {
            ma.costs.insert(format!("mod{x}"), Cost::units(*c));
        }
        s.module_assignment = Some(ma);

        let mut uses: BTreeMap<usize, i64> = BTreeMap::new();
        for mods in &assignment {
            for x in mods {
                *uses.entry(*x).or_default() += 1;
            }
        }
        let expected: i64 = uses.iter().map(|(x, k)| n as i64 * (k - 1) * module_costs[*x]).sum();
        let saving = cost_per_service_modules(&s).unwrap() - cost_modular(&s).unwrap();
        prop_assert_eq!(saving, Cost::units(expected));
        let distinct: BTreeSet<&usize> = assignment.iter().flatten().collect();
        let modular: i64 = distinct.iter().map(|x| module_costs[**x]).sum::<i64>() * n as i64;
        prop_assert_eq!(cost_modular(&s).unwrap(), Cost::units(modular));
    }
}
