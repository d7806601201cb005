//! Browser bindings: power flow on the bundled feeder, switch feasibility on
//! the switchable variant, and a noisy linear state estimate.
//!
//! Every function returns a JSON string; failures come back as
//! `{"error": "<class>", "detail": "..."}`.

use serde_json::{json, Value};
use sparsegrid::feeder::{check_connectivity, enumerate_feasible_topologies, FeasibilityRule, SwitchConfig};
use sparsegrid::loadmodel::{nominal_pdfs, sample_scenario, SamplerConfig};
use sparsegrid::lse::{build_h, estimate_with_noise, greedy_observability_placement};
use sparsegrid::measerr::TveSpec;
use sparsegrid::powerflow::{solve_power_flow, Injections};
use sparsegrid::{fixtures, rng, Result};
use wasm_bindgen::prelude::wasm_bindgen;

fn respond(r: Result<Value>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({"error": e.class(), "detail": e.to_string()}).to_string(),
    }
}

/// Voltage profile of the 34-bus feeder with every load scaled by
/// `load_scale` and every DG by `dg_scale`.
#[wasm_bindgen]
pub fn power_flow(load_scale: f64, dg_scale: f64) -> String {
    respond((|| {
        let m = fixtures::ieee34();
        let mut inj = Injections::nominal(&m);
        inj.loads.iter_mut().flatten().for_each(|s| *s *= load_scale);
        inj.dgs.iter_mut().for_each(|s| *s *= dg_scale);
        let sol = solve_power_flow(&m, &m.base_config(), &inj)?;
        let nodes: Vec<Value> = sol
            .voltages()
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let (b, p) = sol.nodes.node(k);
                json!({"node": format!("{}.{p}", m.buses[b].id), "magnitude": v.magnitude, "angle": v.angle_deg})
            })
            .collect();
        Ok(json!({"converged": sol.converged, "iterations": sol.iterations, "nodes": nodes}))
    })())
}

/// Feasibility of a switch status string (`1` closed, `0` open) on the
/// switchable feeder, with the full feasible list.
#[wasm_bindgen]
pub fn switch_feasibility(bits: &str) -> String {
    respond((|| {
        let m = fixtures::ieee34_switchable();
        let cat = enumerate_feasible_topologies(&m, FeasibilityRule::default())?;
        let config = SwitchConfig::from_bits(bits)?;
        let feasible = check_connectivity(&m, &config)?;
        let all: Vec<String> = cat.configs.iter().map(SwitchConfig::bits).collect();
        Ok(json!({"switches": cat.switch_ids, "feasible": feasible, "catalog": all}))
    })())
}

/// Linear state estimate of one random operating point with the greedy
/// observable placement and `tve_pct` percent TVE noise.
#[wasm_bindgen]
pub fn linear_estimate(tve_pct: f64, seed: u32) -> String {
    respond((|| {
        let m = fixtures::ieee34();
        let config = m.base_config();
        let plan = greedy_observability_placement(&m, &config)?;
        let lmm = build_h(&m, &config, &plan)?;
        let pdfs = nominal_pdfs(&m, 0.3);
        let scen = sample_scenario(&pdfs, &m, &SamplerConfig { master_seed: seed as u64, ..Default::default() }, 0)?;
        let sol = solve_power_flow(&m, &config, &scen.injections)?;
        let tve = TveSpec { tve_limit: tve_pct / 100.0 };
        let est = estimate_with_noise(&m, &lmm, &sol, &tve, &mut rng::stream(seed as u64, rng::tags::NOISE, 0))?;
        let truth = sol.voltages();
        let mut worst: f64 = 0.0;
        let mut total = 0.0;
        let nodes: Vec<Value> = est
            .phasors()
            .iter()
            .zip(&truth)
            .enumerate()
            .map(|(k, (e, t))| {
                let d = (e.angle_deg - t.angle_deg).rem_euclid(360.0);
                let err = d.min(360.0 - d);
                worst = worst.max(err);
                total += err;
                let (b, p) = sol.nodes.node(k);
                json!({"node": format!("{}.{p}", m.buses[b].id), "true_angle": t.angle_deg, "estimated_angle": e.angle_deg,
                       "true_magnitude": t.magnitude, "estimated_magnitude": e.magnitude})
            })
            .collect();
        Ok(json!({
            "smds": plan.ids(&m),
            "angle_mae": total / truth.len() as f64,
            "angle_max": worst,
            "nodes": nodes,
        }))
    })())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nominal_power_flow_converges() {
        let v: Value = serde_json::from_str(&power_flow(1.0, 1.0)).unwrap();
        assert_eq!(v["converged"], true);
        assert_eq!(v["nodes"].as_array().unwrap().len(), 86);
    }

    #[test]
    fn feasibility_agrees_with_catalog() {
        let v: Value = serde_json::from_str(&switch_feasibility("1111")).unwrap();
        let listed = v["catalog"].as_array().unwrap().iter().any(|b| b == "1111");
        assert_eq!(v["feasible"].as_bool().unwrap(), listed);
        let bad: Value = serde_json::from_str(&switch_feasibility("11")).unwrap();
        assert_eq!(bad["error"], "switch_count");
    }

    #[test]
    fn estimate_reports_every_node() {
        let v: Value = serde_json::from_str(&linear_estimate(1.0, 3)).unwrap();
        assert_eq!(v["nodes"].as_array().unwrap().len(), 86);
        assert!(v["angle_mae"].as_f64().unwrap() < 1.0);
    }
}
