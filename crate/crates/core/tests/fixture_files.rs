use std::collections::BTreeMap;

use serde_json::Value;
use sparsegrid::feeder::{enumerate_feasible_topologies, parse_feeder, FeasibilityRule};
use sparsegrid::powerflow::PowerFlowSolver;

fn manifest(name: &str) -> BTreeMap<String, usize> {
    let path = format!("{}/fixtures/{name}.manifest.json", env!("CARGO_MANIFEST_DIR"));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v.as_object().unwrap().iter().map(|(k, x)| (k.clone(), x.as_u64().unwrap() as usize)).collect()
}

#[test]
fn counts_match_manifests() {
    for (name, text) in [("ieee34", sparsegrid::fixtures::IEEE34_JSON), ("ieee34_switchable", sparsegrid::fixtures::IEEE34_SWITCHABLE_JSON)] {
        let m = parse_feeder(text).unwrap();
        let want = manifest(name);
        assert_eq!(m.buses.len(), want["buses"], "{name}");
        assert_eq!(m.branches.len(), want["branches"], "{name}");
        assert_eq!(m.loads.len(), want["loads"], "{name}");
        assert_eq!(m.dgs.len(), want["dgs"], "{name}");
        assert_eq!(m.capacitors.len(), want["capacitors"], "{name}");
        assert_eq!(m.num_switches(), want["switches"], "{name}");
        let solver = PowerFlowSolver::new(&m, &m.base_config(), Default::default()).unwrap();
        assert_eq!(solver.nodes().len(), want["node_phases"], "{name}");
    }
}

#[test]
fn switchable_variant_has_several_topologies() {
    let m = sparsegrid::fixtures::ieee34_switchable();
    assert_eq!(m.num_switches(), 4);
    let cat = enumerate_feasible_topologies(&m, FeasibilityRule::default()).unwrap();
    assert!(cat.len() >= 4 && cat.len() < 16);
}
