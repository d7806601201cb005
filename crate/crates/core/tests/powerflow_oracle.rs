mod common;

use num_complex::Complex64;
use sparsegrid::feeder::{parse_feeder, Phase};
use sparsegrid::fixtures;
use sparsegrid::loadmodel::{nominal_pdfs, sample_scenario, SamplerConfig};
use sparsegrid::powerflow::{solve_power_flow, Injections, PowerFlowOptions, PowerFlowSolver};

#[test]
fn matches_newton_reference_on_random_radial_networks() {
    let tight = PowerFlowOptions { tolerance: 1e-12, max_iterations: 200 };
    for seed in 0..24 {
        let net = common::random_radial(seed);
        let m = parse_feeder(&net.to_json()).unwrap();
        let sol = PowerFlowSolver::new(&m, &m.base_config(), tight).unwrap().solve(&Injections::nominal(&m)).unwrap();
        assert!(sol.converged, "seed {seed}");
        let want = net.newton_solve();
        for (k, &(b, p)) in net.nodes().iter().enumerate() {
            let phase = Phase::ALL[p];
            let got = sol.voltage(m.bus_index(&common::bus_id(b)).unwrap(), phase).unwrap();
            assert!((got - want[k]).norm() < 1e-7, "seed {seed} bus {b} phase {p}: {got} vs {}", want[k]);
        }
    }
}

#[test]
fn fixture_power_balance() {
    let m = fixtures::ieee34();
    assert!(common::power_balance_mismatch(&m, &Injections::nominal(&m)) < 1e-6);
    let pdfs = nominal_pdfs(&m, 0.3);
    for i in 0..10 {
        let inj = sample_scenario(&pdfs, &m, &SamplerConfig::default(), i).unwrap().injections;
        assert!(common::power_balance_mismatch(&m, &inj) < 1e-6);
    }
}

#[test]
fn kirchhoff_at_zero_injection_bus() {
    let m = fixtures::ieee34();
    let config = m.base_config();
    let sol = solve_power_flow(&m, &config, &Injections::nominal(&m)).unwrap();
    // 850 carries no load, DG or capacitor
    let bus = "850";
    let b = m.bus_index(bus).unwrap();
    for p in m.buses[b].phases.iter() {
        let mut total = Complex64::new(0.0, 0.0);
        for c in &sol.branch_currents {
            let br = &m.branches[c.branch];
            if let Some(i) = br.phases.position(p) {
                if br.from_bus == bus {
                    total += c.from_end[i];
                }
                if br.to_bus == bus {
                    total += c.to_end[i];
                }
            }
        }
        assert!(total.norm() < 1e-8, "phase {p:?}: {total}");
    }
}

#[test]
fn balanced_network_is_rotationally_symmetric() {
    let text = r#"{
        "bases": {"kva": 3000},
        "source": {"bus": "1", "voltage_pu": 1.0},
        "buses": [{"id": "1", "phases": "abc", "base_kv": 12.47}, {"id": "2", "phases": "abc", "base_kv": 12.47},
                  {"id": "3", "phases": "abc", "base_kv": 12.47}],
        "branches": [
          {"id": "L12", "from": "1", "to": "2", "phases": "abc", "kind": "line",
           "z": [[[0.4,0.8],[0.1,0.3],[0.1,0.3]],[[0.1,0.3],[0.4,0.8],[0.1,0.3]],[[0.1,0.3],[0.1,0.3],[0.4,0.8]]]},
          {"id": "L23", "from": "2", "to": "3", "phases": "abc", "kind": "line",
           "z": [[[0.3,0.6],[0.1,0.2],[0.1,0.2]],[[0.1,0.2],[0.3,0.6],[0.1,0.2]],[[0.1,0.2],[0.1,0.2],[0.3,0.6]]]}],
        "loads": [{"id": "LD3", "bus": "3", "connection": "wye", "per_phase": [
            {"phase": "a", "p_kw": 400, "q_kvar": 150}, {"phase": "b", "p_kw": 400, "q_kvar": 150},
            {"phase": "c", "p_kw": 400, "q_kvar": 150}]}]
    }"#;
    let m = parse_feeder(text).unwrap();
    let sol = solve_power_flow(&m, &m.base_config(), &Injections::nominal(&m)).unwrap();
    let rot = Complex64::from_polar(1.0, -120f64.to_radians());
    for b in 0..3 {
        let va = sol.voltage(b, Phase::A).unwrap();
        assert!((sol.voltage(b, Phase::B).unwrap() - va * rot).norm() < 1e-9);
        assert!((sol.voltage(b, Phase::C).unwrap() - va * rot.conj()).norm() < 1e-9);
    }
}

#[test]
fn identical_inputs_identical_bits() {
    let m = fixtures::ieee34();
    let pdfs = nominal_pdfs(&m, 0.3);
    let inj = sample_scenario(&pdfs, &m, &SamplerConfig::default(), 3).unwrap().injections;
    let a = solve_power_flow(&m, &m.base_config(), &inj).unwrap();
    let b = solve_power_flow(&m, &m.base_config(), &inj).unwrap();
    assert_eq!(a.v, b.v);
}
