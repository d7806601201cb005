//! Independent reference implementations shared by the integration tests
//! and the acceptance harness.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use sparsegrid::feeder::{build_ybus, FeederModel};
use sparsegrid::powerflow::{branch_currents, solve_power_flow, Injections};

pub const KV: f64 = 12.47;
pub const KVA: f64 = 3000.0;
const LETTERS: [char; 3] = ['a', 'b', 'c'];

pub struct Line {
    pub from: usize,
    pub to: usize,
    pub phases: Vec<usize>,
    /// Ohms over `phases`.
    pub z: Vec<Vec<Complex64>>,
}

pub struct LoadComp {
    pub bus: usize,
    /// One phase for wye, two for delta.
    pub terminals: Vec<usize>,
    pub s_kva: Complex64,
}

pub struct RadialNet {
    pub bus_phases: Vec<Vec<usize>>,
    pub lines: Vec<Line>,
    pub loads: Vec<LoadComp>,
}

pub fn bus_id(i: usize) -> String {
    format!("b{i:02}")
}

fn phase_str(ph: &[usize]) -> String {
    ph.iter().map(|&p| LETTERS[p]).collect()
}

/// Random tree of 2..=10 buses; child phases are a subset of the parent's;
/// wye loads everywhere and some delta loads on multi-phase buses.
pub fn random_radial(seed: u64) -> RadialNet {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let n = r.random_range(2..=10);
    let mut bus_phases = vec![vec![0, 1, 2]];
    let mut lines = Vec::new();
    let mut loads = Vec::new();
    for b in 1..n {
        let parent = r.random_range(0..b);
        let pp = bus_phases[parent].clone();
        let phases: Vec<usize> = if r.random_bool(0.6) || pp.len() == 1 {
            pp.clone()
        } else {
            let keep: Vec<usize> = pp.iter().copied().filter(|_| r.random_bool(0.5)).collect();
            if keep.is_empty() { vec![pp[r.random_range(0..pp.len())]] } else { keep }
        };
        let len = r.random_range(0.3..1.5);
        let z: Vec<Vec<Complex64>> = (0..phases.len())
            .map(|i| {
                (0..phases.len())
                    .map(|j| if i == j { Complex64::new(0.4, 0.8) * len } else { Complex64::new(0.1, 0.25) * len })
                    .collect()
            })
            .collect();
        lines.push(Line { from: parent, to: b, phases: phases.clone(), z });
        for &p in &phases {
            let kw = r.random_range(30.0..250.0);
            loads.push(LoadComp { bus: b, terminals: vec![p], s_kva: Complex64::new(kw, kw * r.random_range(0.1..0.5)) });
        }
        if phases.len() >= 2 && r.random_bool(0.4) {
            let kw = r.random_range(30.0..150.0);
            loads.push(LoadComp { bus: b, terminals: vec![phases[0], phases[1]], s_kva: Complex64::new(kw, 0.3 * kw) });
        }
        bus_phases.push(phases);
    }
    RadialNet { bus_phases, lines, loads }
}

fn zjson(z: &[Vec<Complex64>]) -> Value {
    json!(z.iter().map(|row| row.iter().map(|c| vec![c.re, c.im]).collect::<Vec<_>>()).collect::<Vec<_>>())
}

impl RadialNet {
    pub fn to_json(&self) -> String {
        let buses: Vec<Value> =
            self.bus_phases.iter().enumerate().map(|(i, p)| json!({"id": bus_id(i), "phases": phase_str(p), "base_kv": KV})).collect();
        let branches: Vec<Value> = self
            .lines
            .iter()
            .map(|l| {
                json!({"id": format!("L{}-{}", l.from, l.to), "from": bus_id(l.from), "to": bus_id(l.to),
                       "phases": phase_str(&l.phases), "kind": "line", "z": zjson(&l.z)})
            })
            .collect();
        let loads: Vec<Value> = self
            .loads
            .iter()
            .enumerate()
            .map(|(i, c)| {
                json!({"id": format!("LD{i}"), "bus": bus_id(c.bus),
                       "connection": if c.terminals.len() == 1 { "wye" } else { "delta" },
                       "per_phase": [{"phase": phase_str(&c.terminals), "p_kw": c.s_kva.re, "q_kvar": c.s_kva.im}]})
            })
            .collect();
        json!({"bases": {"kva": KVA}, "source": {"bus": bus_id(0), "voltage_pu": 1.0},
               "buses": buses, "branches": branches, "loads": loads})
        .to_string()
    }

    /// Node-phase list, source first, as (bus, phase).
    pub fn nodes(&self) -> Vec<(usize, usize)> {
        self.bus_phases.iter().enumerate().flat_map(|(b, ph)| ph.iter().map(move |&p| (b, p))).collect()
    }

    /// Newton-Raphson on the nodal current mismatch, rectangular unknowns,
    /// finite-difference Jacobian. Returns per-unit voltages in `nodes()`
    /// order.
    pub fn newton_solve(&self) -> Vec<Complex64> {
        let nodes = self.nodes();
        let pos = |b: usize, p: usize| nodes.iter().position(|&n| n == (b, p)).unwrap();
        let n = nodes.len();
        let zb = KV * KV / (KVA / 1000.0);
        let mut y = DMatrix::<Complex64>::zeros(n, n);
        for l in &self.lines {
            let k = l.phases.len();
            let zpu = DMatrix::from_fn(k, k, |i, j| l.z[i][j] / zb);
            let yl = zpu.try_inverse().unwrap();
            for i in 0..k {
                for j in 0..k {
                    let (fi, fj) = (pos(l.from, l.phases[i]), pos(l.from, l.phases[j]));
                    let (ti, tj) = (pos(l.to, l.phases[i]), pos(l.to, l.phases[j]));
                    y[(fi, fj)] += yl[(i, j)];
                    y[(ti, tj)] += yl[(i, j)];
                    y[(fi, tj)] -= yl[(i, j)];
                    y[(ti, fj)] -= yl[(i, j)];
                }
            }
        }
        let base = KVA / 3.0;
        let src = 3;
        let mut v: Vec<Complex64> =
            nodes.iter().map(|&(_, p)| Complex64::from_polar(1.0, -(p as f64) * 120f64.to_radians())).collect();
        let mismatch = |v: &[Complex64]| -> DVector<f64> {
            let mut inj = vec![Complex64::new(0.0, 0.0); n];
            for c in &self.loads {
                let s = c.s_kva / base;
                if c.terminals.len() == 1 {
                    let k = pos(c.bus, c.terminals[0]);
                    inj[k] -= (s / v[k]).conj();
                } else {
                    let (a, b) = (pos(c.bus, c.terminals[0]), pos(c.bus, c.terminals[1]));
                    let i = (s / (v[a] - v[b])).conj();
                    inj[a] -= i;
                    inj[b] += i;
                }
            }
            let vv = DVector::from_column_slice(v);
            let yv = &y * vv;
            let mut f = DVector::zeros(2 * (n - src));
            for k in src..n {
                let d = yv[k] - inj[k];
                f[2 * (k - src)] = d.re;
                f[2 * (k - src) + 1] = d.im;
            }
            f
        };
        let m = 2 * (n - src);
        for _ in 0..50 {
            let f = mismatch(&v);
            if f.amax() < 1e-13 {
                break;
            }
            let mut jac = DMatrix::zeros(m, m);
            let h = 1e-7;
            for c in 0..m {
                let (k, im) = (src + c / 2, c % 2 == 1);
                let d = if im { Complex64::new(0.0, h) } else { Complex64::new(h, 0.0) };
                let mut vp = v.clone();
                vp[k] += d;
                let mut vm = v.clone();
                vm[k] -= d;
                let col = (mismatch(&vp) - mismatch(&vm)) / (2.0 * h);
                jac.set_column(c, &col);
            }
            let dx = jac.lu().solve(&f).expect("nonsingular Jacobian");
            for c in 0..m {
                let k = src + c / 2;
                if c % 2 == 0 {
                    v[k].re -= dx[c];
                } else {
                    v[k].im -= dx[c];
                }
            }
        }
        v
    }
}

/// Random connected multigraph with switchable branches, for enumeration.
pub struct SwitchGraph {
    pub n_buses: usize,
    /// (from, to, is_switch)
    pub edges: Vec<(usize, usize, bool)>,
    pub loaded: Vec<bool>,
}

pub fn random_switch_graph(seed: u64) -> SwitchGraph {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let n = r.random_range(3..=9);
    let mut edges = Vec::new();
    for b in 1..n {
        edges.push((r.random_range(0..b), b, false));
    }
    let extra = r.random_range(0..=4);
    for _ in 0..extra {
        let a = r.random_range(0..n);
        let b = r.random_range(0..n);
        if a != b {
            edges.push((a.min(b), a.max(b), false));
        }
    }
    let switches = r.random_range(1..=10.min(edges.len()));
    let mut idx: Vec<usize> = (0..edges.len()).collect();
    for i in (1..idx.len()).rev() {
        idx.swap(i, r.random_range(0..=i));
    }
    for &i in idx.iter().take(switches) {
        edges[i].2 = true;
    }
    let loaded = (0..n).map(|b| b > 0 && r.random_bool(0.6)).collect();
    SwitchGraph { n_buses: n, edges, loaded }
}

impl SwitchGraph {
    pub fn to_json(&self) -> String {
        let buses: Vec<Value> = (0..self.n_buses).map(|i| json!({"id": bus_id(i), "phases": "a", "base_kv": KV})).collect();
        let branches: Vec<Value> = self
            .edges
            .iter()
            .enumerate()
            .map(|(i, &(a, b, sw))| {
                let mut v = json!({"id": format!("E{i:02}"), "from": bus_id(a), "to": bus_id(b), "phases": "a",
                                   "kind": if sw { "switch" } else { "line" },
                                   "z": [[[if sw { 1e-4 } else { 0.3 }, if sw { 0.0 } else { 0.6 }]]]});
                if sw {
                    v["closed"] = json!(true);
                }
                v
            })
            .collect();
        let loads: Vec<Value> = (0..self.n_buses)
            .filter(|&b| self.loaded[b])
            .map(|b| json!({"id": format!("LD{b}"), "bus": bus_id(b), "connection": "wye",
                            "per_phase": [{"phase": "a", "p_kw": 10.0, "q_kvar": 1.0}]}))
            .collect();
        json!({"bases": {"kva": KVA}, "source": {"bus": bus_id(0), "voltage_pu": 1.0},
               "buses": buses, "branches": branches, "loads": loads})
        .to_string()
    }

    /// Switch ids in the order the model lists them (branch order).
    pub fn switch_edges(&self) -> Vec<usize> {
        (0..self.edges.len()).filter(|&i| self.edges[i].2).collect()
    }

    /// Every status vector (switch order as in `switch_edges`, first switch
    /// most significant) under which all loaded buses reach the source.
    pub fn brute_force_feasible(&self) -> Vec<Vec<bool>> {
        let sw = self.switch_edges();
        let s = sw.len();
        let mut out = Vec::new();
        for mask in 0u32..(1 << s) {
            let status: Vec<bool> = (0..s).map(|i| mask >> (s - 1 - i) & 1 == 1).collect();
            let on = |e: usize| !self.edges[e].2 || status[sw.iter().position(|&x| x == e).unwrap()];
            let mut seen = vec![false; self.n_buses];
            seen[0] = true;
            let mut changed = true;
            while changed {
                changed = false;
                for (e, &(a, b, _)) in self.edges.iter().enumerate() {
                    if on(e) && seen[a] != seen[b] {
                        seen[a] = true;
                        seen[b] = true;
                        changed = true;
                    }
                }
            }
            if (0..self.n_buses).all(|b| !self.loaded[b] || seen[b]) {
                out.push(status);
            }
        }
        out
    }
}

/// Source power minus demand, branch losses and shunt absorption, in pu.
pub fn power_balance_mismatch(m: &FeederModel, inj: &Injections) -> f64 {
    let config = m.base_config();
    let sol = solve_power_flow(m, &config, inj).unwrap();
    assert!(sol.converged && sol.iterations <= 100);
    let ybus = build_ybus(m, &config).unwrap();
    let src = m.source_bus_index();
    let yv = &ybus.y * nalgebra::DVector::from_column_slice(&sol.v);
    let source: Complex64 = (0..sol.v.len()).filter(|&k| sol.nodes.node(k).0 == src).map(|k| sol.v[k] * yv[k].conj()).sum();
    let base = m.phase_kva();
    let demand: Complex64 = inj.loads.iter().flatten().sum::<Complex64>() / base - inj.dgs.iter().sum::<Complex64>() / base;
    let currents = branch_currents(m, &config, &sol.v).unwrap();
    let mut losses = Complex64::new(0.0, 0.0);
    for c in &currents {
        let br = &m.branches[c.branch];
        let (f, t) = (m.bus_index(&br.from_bus).unwrap(), m.bus_index(&br.to_bus).unwrap());
        for (i, p) in br.phases.iter().enumerate() {
            losses += sol.voltage(f, p).unwrap() * c.from_end[i].conj() + sol.voltage(t, p).unwrap() * c.to_end[i].conj();
        }
    }
    let shunt: Complex64 = ybus.shunts.iter().map(|&(k, y)| sol.v[k] * (y * sol.v[k]).conj()).sum();
    (source - demand - losses - shunt).norm()
}
