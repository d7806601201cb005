//! Unbalanced three-phase power flow by fixed-point current injection.
//!
//! The source bus is held at its fixed phasors; every other node-phase is
//! updated with `V_n <- Y_nn^-1 (I(V) - Y_ns V_s)`, where `I(V)` is the
//! constant-PQ injection current. `Y_nn` is factorized once per topology.

use nalgebra::{DVector, LU};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feeder::ybus::{CMat, Ybus};
use crate::feeder::{build_ybus, Connection, FeederModel, LoadTerminal, NodeIndex, Phase, SwitchConfig};
use crate::phasor::Phasor;

/// Complex powers in kW + j kvar. `loads[i][k]` is component `k` of load `i`
/// (consumed); `dgs[i]` is the total three-phase output of DG `i`
/// (generated), split equally over its phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Injections {
    pub loads: Vec<Vec<Complex64>>,
    pub dgs: Vec<Complex64>,
}

impl Injections {
    /// Nameplate loads, DG at rated output and unity power factor.
    pub fn nominal(model: &FeederModel) -> Self {
        Self {
            loads: model.loads.iter().map(|l| l.per_phase.iter().map(|c| Complex64::new(c.p_kw, c.q_kvar)).collect()).collect(),
            dgs: model.dgs.iter().map(|d| Complex64::new(d.rating_kw, 0.0)).collect(),
        }
    }

    pub fn zero(model: &FeederModel) -> Self {
        Self {
            loads: model.loads.iter().map(|l| vec![Complex64::new(0.0, 0.0); l.per_phase.len()]).collect(),
            dgs: vec![Complex64::new(0.0, 0.0); model.dgs.len()],
        }
    }

    fn check(&self, model: &FeederModel) -> Result<()> {
        if self.loads.len() != model.loads.len() || self.dgs.len() != model.dgs.len() {
            return Err(Error::Invalid("injections do not cover every load and DG".into()));
        }
        for (l, v) in model.loads.iter().zip(&self.loads) {
            if l.per_phase.len() != v.len() {
                return Err(Error::Invalid(format!("load `{}` expects {} components", l.id, l.per_phase.len())));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFlowOptions {
    /// Convergence threshold on the complex power mismatch, per-unit.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for PowerFlowOptions {
    fn default() -> Self {
        Self { tolerance: 1e-6, max_iterations: 100 }
    }
}

/// Currents entering a branch at each end, per branch phase, per-unit.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchCurrent {
    pub branch: usize,
    /// Flowing from the `from` bus into the branch (from -> to).
    pub from_end: Vec<Complex64>,
    /// Flowing from the `to` bus into the branch.
    pub to_end: Vec<Complex64>,
}

#[derive(Debug, Clone)]
pub struct PowerFlowSolution {
    pub nodes: NodeIndex,
    /// Rectangular voltages in canonical node order, per-unit.
    pub v: Vec<Complex64>,
    pub branch_currents: Vec<BranchCurrent>,
    pub converged: bool,
    pub iterations: usize,
    pub max_mismatch: f64,
}

impl PowerFlowSolution {
    pub fn voltages(&self) -> Vec<Phasor> {
        self.v.iter().map(|&z| Phasor::from_complex(z)).collect()
    }

    pub fn voltage(&self, bus: usize, phase: Phase) -> Option<Complex64> {
        self.nodes.get(bus, phase).map(|k| self.v[k])
    }

    pub fn branch_current(&self, branch: usize) -> Option<&BranchCurrent> {
        self.branch_currents.iter().find(|c| c.branch == branch)
    }
}

/// Topology-specific solver holding the factorized `Y_nn`.
pub struct PowerFlowSolver<'a> {
    model: &'a FeederModel,
    pub ybus: Ybus,
    source_nodes: Vec<usize>,
    other_nodes: Vec<usize>,
    /// Position of each node in `other_nodes`, or `None` for source nodes.
    reduced_pos: Vec<Option<usize>>,
    ynn_lu: LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
    yns: CMat,
    pub options: PowerFlowOptions,
}

impl<'a> PowerFlowSolver<'a> {
    pub fn new(model: &'a FeederModel, config: &SwitchConfig, options: PowerFlowOptions) -> Result<Self> {
        let ybus = build_ybus(model, config)?;
        let src = model.source_bus_index();
        let n = ybus.nodes.len();
        let (source_nodes, other_nodes): (Vec<usize>, Vec<usize>) = (0..n).partition(|&k| ybus.nodes.node(k).0 == src);
        let mut reduced_pos = vec![None; n];
        for (i, &k) in other_nodes.iter().enumerate() {
            reduced_pos[k] = Some(i);
        }
        let ynn = ybus.y.select_rows(&other_nodes).select_columns(&other_nodes);
        let yns = ybus.y.select_rows(&other_nodes).select_columns(&source_nodes);
        let ynn_lu = ynn.lu();
        if !ynn_lu.is_invertible() {
            return Err(Error::Singular("Y_nn of the energized network".into()));
        }
        Ok(Self { model, ybus, source_nodes, other_nodes, reduced_pos, ynn_lu, yns, options })
    }

    pub fn nodes(&self) -> &NodeIndex {
        &self.ybus.nodes
    }

    fn source_voltages(&self) -> Vec<Complex64> {
        let s = &self.model.source;
        self.source_nodes
            .iter()
            .map(|&k| {
                let p = self.ybus.nodes.node(k).1;
                Phasor::new(s.voltage_pu, s.angle_deg + p.nominal_angle_deg()).to_complex()
            })
            .collect()
    }

    fn flat_start(&self) -> Vec<Complex64> {
        let mut v: Vec<Complex64> = self
            .ybus
            .nodes
            .iter()
            .map(|(_, p)| Phasor::new(1.0, self.model.source.angle_deg + p.nominal_angle_deg()).to_complex())
            .collect();
        for (&k, vs) in self.source_nodes.iter().zip(self.source_voltages()) {
            v[k] = vs;
        }
        v
    }

    pub fn solve(&self, inj: &Injections) -> Result<PowerFlowSolution> {
        inj.check(self.model)?;
        let vs = DVector::from_vec(self.source_voltages());
        let ns_term = &self.yns * &vs;
        let mut v = self.flat_start();
        let mut converged = false;
        let mut iterations = 0;
        let mut mismatch = residual(self.model, &self.ybus, &v, inj, &self.reduced_pos);
        if mismatch < self.options.tolerance {
            converged = true;
        }
        while !converged && iterations < self.options.max_iterations {
            iterations += 1;
            let i_inj = injection_currents(self.model, &self.ybus.nodes, &v, inj);
            let rhs = DVector::from_iterator(
                self.other_nodes.len(),
                self.other_nodes.iter().enumerate().map(|(i, &k)| i_inj[k] - ns_term[i]),
            );
            let vn = self.ynn_lu.solve(&rhs).ok_or_else(|| Error::Singular("Y_nn solve".into()))?;
            for (i, &k) in self.other_nodes.iter().enumerate() {
                v[k] = vn[i];
            }
            if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                break;
            }
            mismatch = residual(self.model, &self.ybus, &v, inj, &self.reduced_pos);
            converged = mismatch < self.options.tolerance;
        }
        let branch_currents = currents_from_primitives(&self.ybus, &v);
        Ok(PowerFlowSolution {
            nodes: self.ybus.nodes.clone(),
            v,
            branch_currents,
            converged,
            iterations,
            max_mismatch: mismatch,
        })
    }
}

/// One-shot solve; builds and factorizes the admittance matrix.
pub fn solve_power_flow(model: &FeederModel, config: &SwitchConfig, inj: &Injections) -> Result<PowerFlowSolution> {
    PowerFlowSolver::new(model, config, PowerFlowOptions::default())?.solve(inj)
}

/// Net current injected into each node by loads (negative) and DG.
pub fn injection_currents(model: &FeederModel, nodes: &NodeIndex, v: &[Complex64], inj: &Injections) -> Vec<Complex64> {
    let base = model.phase_kva();
    let mut cur = vec![Complex64::new(0.0, 0.0); nodes.len()];
    for (load, powers) in model.loads.iter().zip(&inj.loads) {
        let bus = model.bus_index(&load.bus).expect("validated");
        for (comp, &s) in load.per_phase.iter().zip(powers) {
            let s = s / base;
            match (load.connection, comp.phase) {
                (Connection::Wye, LoadTerminal::Phase(p)) => {
                    if let Some(k) = nodes.get(bus, p) {
                        cur[k] -= (s / v[k]).conj();
                    }
                }
                (Connection::Delta, LoadTerminal::Pair(p, q)) => {
                    if let (Some(kp), Some(kq)) = (nodes.get(bus, p), nodes.get(bus, q)) {
                        let i_pq = (s / (v[kp] - v[kq])).conj();
                        cur[kp] -= i_pq;
                        cur[kq] += i_pq;
                    }
                }
                _ => unreachable!("validated connection/terminal pairing"),
            }
        }
    }
    for (dg, &s) in model.dgs.iter().zip(&inj.dgs) {
        let bus = model.bus_index(&dg.bus).expect("validated");
        let per_phase = s / base / dg.phases.len() as f64;
        for p in dg.phases.iter() {
            if let Some(k) = nodes.get(bus, p) {
                cur[k] += (per_phase / v[k]).conj();
            }
        }
    }
    cur
}

fn residual(model: &FeederModel, ybus: &Ybus, v: &[Complex64], inj: &Injections, reduced_pos: &[Option<usize>]) -> f64 {
    let i_inj = injection_currents(model, &ybus.nodes, v, inj);
    let vv = DVector::from_column_slice(v);
    let yv = &ybus.y * &vv;
    (0..v.len())
        .filter(|&k| reduced_pos[k].is_some())
        .map(|k| (v[k] * (i_inj[k] - yv[k]).conj()).norm())
        .fold(0.0, f64::max)
}

/// Largest complex power mismatch over the non-source node-phases, per-unit.
pub fn injection_residual(model: &FeederModel, config: &SwitchConfig, voltages: &[Complex64], inj: &Injections) -> Result<f64> {
    inj.check(model)?;
    let ybus = build_ybus(model, config)?;
    if voltages.len() != ybus.nodes.len() {
        return Err(Error::Shape { expected: format!("{} node voltages", ybus.nodes.len()), got: voltages.len().to_string() });
    }
    let src = model.source_bus_index();
    let reduced: Vec<Option<usize>> = ybus.nodes.iter().map(|(b, _)| if b == src { None } else { Some(0) }).collect();
    Ok(residual(model, &ybus, voltages, inj, &reduced))
}

fn currents_from_primitives(ybus: &Ybus, v: &[Complex64]) -> Vec<BranchCurrent> {
    ybus.primitives
        .iter()
        .map(|p| {
            let vf = DVector::from_iterator(p.from_nodes.len(), p.from_nodes.iter().map(|&k| v[k]));
            let vt = DVector::from_iterator(p.to_nodes.len(), p.to_nodes.iter().map(|&k| v[k]));
            let from_end = &p.yff * &vf + &p.yft * &vt;
            let to_end = &p.ytf * &vf + &p.ytt * &vt;
            BranchCurrent { branch: p.branch, from_end: from_end.iter().copied().collect(), to_end: to_end.iter().copied().collect() }
        })
        .collect()
}

/// Branch currents for every in-service branch, given node voltages in the
/// canonical order of this topology.
pub fn branch_currents(model: &FeederModel, config: &SwitchConfig, voltages: &[Complex64]) -> Result<Vec<BranchCurrent>> {
    let ybus = build_ybus(model, config)?;
    if voltages.len() != ybus.nodes.len() {
        return Err(Error::Shape { expected: format!("{} node voltages", ybus.nodes.len()), got: voltages.len().to_string() });
    }
    Ok(currents_from_primitives(&ybus, voltages))
}

/// Current of one branch by id; errors for unknown or out-of-service branches.
pub fn branch_current(model: &FeederModel, config: &SwitchConfig, voltages: &[Complex64], branch_id: &str) -> Result<BranchCurrent> {
    let b = model.branch_index(branch_id).ok_or_else(|| Error::Unknown { kind: "branch", id: branch_id.into() })?;
    branch_currents(model, config, voltages)?
        .into_iter()
        .find(|c| c.branch == b)
        .ok_or_else(|| Error::Unknown { kind: "in-service branch", id: branch_id.into() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feeder::parse_feeder;

    const TWO_BUS: &str = r#"{
        "bases": {"kva": 3000},
        "source": {"bus": "1", "voltage_pu": 1.0},
        "buses": [{"id": "1", "phases": "a", "base_kv": 1.7320508075688772},
                  {"id": "2", "phases": "a", "base_kv": 1.7320508075688772}],
        "branches": [{"id": "L12", "from": "1", "to": "2", "phases": "a", "kind": "line",
                      "z": [[[0.01, 0.02]]]}],
        "loads": [{"id": "LD2", "bus": "2", "connection": "wye",
                   "per_phase": [{"phase": "a", "p_kw": 1000, "q_kvar": 500}]}]
    }"#;

    /// Closed form of the two-bus problem: |V2|^4 + (2(RP+XQ) - |V1|^2)|V2|^2 + |Z|^2|S|^2 = 0,
    /// then V2 = conj((|V2|^2 + Z S*) / V1).
    fn two_bus_oracle(z: Complex64, s: Complex64, v1: Complex64) -> Complex64 {
        let b = 2.0 * (z.re * s.re + z.im * s.im) - v1.norm_sqr();
        let c = z.norm_sqr() * s.norm_sqr();
        let m2 = (-b + (b * b - 4.0 * c).sqrt()) / 2.0;
        ((Complex64::new(m2, 0.0) + z * s.conj()) / v1).conj()
    }

    #[test]
    fn two_bus_matches_closed_form() {
        let m = parse_feeder(TWO_BUS).unwrap();
        let tight = PowerFlowOptions { tolerance: 1e-12, max_iterations: 100 };
        let sol = PowerFlowSolver::new(&m, &m.base_config(), tight).unwrap().solve(&Injections::nominal(&m)).unwrap();
        assert!(sol.converged);
        let want = two_bus_oracle(Complex64::new(0.01, 0.02), Complex64::new(1.0, 0.5), Complex64::new(1.0, 0.0));
        assert!((sol.v[1] - want).norm() < 1e-8, "{} vs {}", sol.v[1], want);
        let i = branch_current(&m, &m.base_config(), &sol.v, "L12").unwrap();
        let ohm = (sol.v[0] - sol.v[1]) / Complex64::new(0.01, 0.02);
        assert!((i.from_end[0] - ohm).norm() < 1e-12);
        assert!((i.to_end[0] + ohm).norm() < 1e-12);
    }

    #[test]
    fn no_load_gives_source_voltage() {
        let m = crate::fixtures::ieee34();
        let mut inj = Injections::zero(&m);
        inj.dgs.iter_mut().for_each(|d| *d = Complex64::new(0.0, 0.0));
        let m_nocap = {
            let mut text = m.to_json();
            let start = text.find("\"capacitors\"").unwrap();
            let end = text[start..].find(']').unwrap() + start + 1;
            text.replace_range(start..end, "\"capacitors\": []");
            let mut f: serde_json::Value = serde_json::from_str(&text).unwrap();
            for br in f["branches"].as_array_mut().unwrap() {
                br.as_object_mut().unwrap().remove("y");
                if let Some(t) = br.get_mut("taps") {
                    *t = serde_json::json!(vec![1.0; t.as_array().unwrap().len()]);
                }
            }
            parse_feeder(&f.to_string()).unwrap()
        };
        let sol = solve_power_flow(&m_nocap, &m_nocap.base_config(), &inj).unwrap();
        assert!(sol.converged);
        for (k, (_, p)) in sol.nodes.iter().enumerate() {
            let want = Phasor::new(m.source.voltage_pu, p.nominal_angle_deg()).to_complex();
            assert!((sol.v[k] - want).norm() < 1e-9);
        }
    }

    #[test]
    fn exact_no_load_residual_vanishes() {
        let m = parse_feeder(TWO_BUS).unwrap();
        let v = vec![Complex64::new(1.0, 0.0); 2];
        let r = injection_residual(&m, &m.base_config(), &v, &Injections::zero(&m)).unwrap();
        assert!(r < 1e-12);
    }

    #[test]
    fn residual_grows_when_perturbed() {
        let m = parse_feeder(TWO_BUS).unwrap();
        let inj = Injections::nominal(&m);
        let sol = solve_power_flow(&m, &m.base_config(), &inj).unwrap();
        let base = injection_residual(&m, &m.base_config(), &sol.v, &inj).unwrap();
        assert!(base <= 1e-6);
        let mut v = sol.v.clone();
        v[1] += Complex64::new(1e-3, 0.0);
        assert!(injection_residual(&m, &m.base_config(), &v, &inj).unwrap() > base);
    }

    #[test]
    fn unknown_branch_is_error() {
        let m = parse_feeder(TWO_BUS).unwrap();
        let sol = solve_power_flow(&m, &m.base_config(), &Injections::nominal(&m)).unwrap();
        assert!(matches!(branch_current(&m, &m.base_config(), &sol.v, "nope"), Err(Error::Unknown { .. })));
    }

    #[test]
    fn fixture_converges() {
        let m = crate::fixtures::ieee34();
        let sol = solve_power_flow(&m, &m.base_config(), &Injections::nominal(&m)).unwrap();
        assert!(sol.converged, "mismatch {}", sol.max_mismatch);
        assert!(sol.iterations <= 100);
        let vm: Vec<f64> = sol.v.iter().map(|z| z.norm()).collect();
        assert!(vm.iter().all(|&x| x > 0.85 && x < 1.15), "{vm:?}");
    }
}
