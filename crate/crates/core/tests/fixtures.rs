use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sally_core::costmodel::{Cost, CostScenario, StrategyRegistry};
use sally_core::mockapp::MockDocument;
use sally_core::protocol::mid;
use sally_core::registry::{load_module_file, ApplicationRegistration, Registry, ServiceRegistration};
use sally_core::services::Ontology;

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

fn raw_json(rel: &str) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(fixture(rel)).unwrap()).unwrap()
}

#[test]
fn sample_ontology_counts() {
    let o = Ontology::load(fixture("ontology/sample.json")).unwrap();
    assert_eq!(o.len(), 5);
    let relations: usize = o.concepts().iter().map(|c| c.relations.len()).sum();
    assert_eq!(relations, 4);
}

#[test]
fn geometry_ontology_covers_the_domain() {
    let o = Ontology::load(fixture("ontology/geometry.json")).unwrap();
    assert!(o.len() >= 12);
    for uri in ["uri:triangle", "uri:vertex", "uri:edge", "uri:angle"] {
        assert!(o.get(uri).is_some(), "{uri}");
    }
    let n = o.neighborhood("uri:triangle").unwrap();
    assert_eq!((n.nodes.len(), n.edges.len()), (4, 3));
    let lone = o.neighborhood("uri:point").unwrap();
    assert_eq!((lone.nodes.len(), lone.edges.len()), (1, 0));
}

#[test]
fn definitions_match_the_file_verbatim() {
    let o = Ontology::load(fixture("ontology/geometry.json")).unwrap();
    let raw = raw_json("ontology/geometry.json");
    for c in raw.as_array().unwrap() {
        let uri = c["uri"].as_str().unwrap();
        assert_eq!(o.get(uri).unwrap().definition, c["definition"].as_str().unwrap());
    }
}

#[test]
fn worksheet_document_kinds() {
    let d = MockDocument::load(fixture("docs/worksheet.json")).unwrap();
    assert_eq!(d.len(), 6);
    let mut kinds: BTreeMap<&str, usize> = BTreeMap::new();
    for o in d.objects() {
        *kinds.entry(o.object.kind.as_str()).or_default() += 1;
    }
    assert_eq!(kinds, BTreeMap::from([("cell-range", 2), ("formula", 1), ("image", 1), ("text-range", 2)]));
    assert!(MockDocument::load(fixture("docs/sketch.json")).is_ok());
}

#[test]
fn module_file_reproduces_the_three_app_example() {
    let mut r = Registry::with_modules(load_module_file(fixture("modules/three-apps.json")).unwrap()).unwrap();
    let apps = [
        ("app1", &["m.one/1", "m.two/1", "m.three/1"][..]),
        ("app2", &["m.one/1", "m.three/1"]),
        ("app3", &["m.two/1", "m.three/1"]),
    ];
    for (name, implements) in apps {
        r.register_application(ApplicationRegistration {
            client_id: name.into(),
            name: name.into(),
            implements: implements.iter().map(|s| mid(s)).collect(),
        })
        .unwrap();
    }
    let services = [
        ("mkm1", &["adm.one/1"][..]),
        ("mkm2", &["m.one/1", "m.three/1"]),
        ("mkm3", &["m.two/1"]),
    ];
    for (name, requires) in services {
        r.register_service(ServiceRegistration {
            client_id: name.into(),
            name: name.into(),
            requires: requires.iter().map(|s| mid(s)).collect(),
        })
        .unwrap();
    }
    let m = r.integration_matrix();
    assert_eq!(m.apps_for("mkm1"), ["app1", "app2"]);
    assert_eq!(m.apps_for("mkm2"), ["app1", "app2"]);
    assert_eq!(m.apps_for("mkm3"), ["app1", "app3"]);
}

#[test]
fn cost_fixture_evaluates_to_hand_computed_values() {
    let s = CostScenario::load(fixture("cost/three-by-three.json")).unwrap();
    let c = StrategyRegistry::standard().compare(&s, &[]).unwrap();
    let dec = |t: &str| t.parse::<Cost>().unwrap();
    // direct: 9 pairs x (4 + 2 + 3)
    assert_eq!(c.cost_of("direct"), Some(dec("81")));
    // standalone: 9 x (5 + 3) + 3 x (2 + 4)
    assert_eq!(c.cost_of("standalone"), Some(dec("90")));
    // theo: 9 x 5 + 3 x 9
    assert_eq!(c.cost_of("theo"), Some(dec("72")));
    // apptype: spreadsheet 2 x 6 + 3 x 9, text 6 + 3 x 9
    assert_eq!(c.cost_of("apptype"), Some(dec("72")));
    // modular: two spreadsheets at 1 + 1.5 + 2 + 1, the text app without storage
    assert_eq!(c.cost_of("modular"), Some(dec("14.5")));
}
