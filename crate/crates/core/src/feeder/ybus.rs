use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{BranchKind, FeederModel, Phase};
use crate::error::{Error, Result};
use crate::feeder::{apply_switch_config, SwitchConfig};

pub type CMat = DMatrix<Complex64>;

/// Canonical ordering of energized node-phases: bus id, then phase a < b < c.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeIndex {
    nodes: Vec<(usize, Phase)>,
    lookup: HashMap<(usize, Phase), usize>,
}

impl NodeIndex {
    pub fn new(model: &FeederModel, energized: &[bool]) -> Self {
        let nodes: Vec<(usize, Phase)> = model
            .buses
            .iter()
            .enumerate()
            .filter(|(i, _)| energized[*i])
            .flat_map(|(i, b)| b.phases.iter().map(move |p| (i, p)))
            .collect();
        let lookup = nodes.iter().enumerate().map(|(k, &n)| (n, k)).collect();
        Self { nodes, lookup }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn get(&self, bus: usize, phase: Phase) -> Option<usize> {
        self.lookup.get(&(bus, phase)).copied()
    }

    pub fn node(&self, k: usize) -> (usize, Phase) {
        self.nodes[k]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, Phase)> + '_ {
        self.nodes.iter().copied()
    }

    /// Labels such as `"832.b"`.
    pub fn labels(&self, model: &FeederModel) -> Vec<String> {
        self.nodes.iter().map(|&(b, p)| format!("{}.{}", model.buses[b].id, p)).collect()
    }
}

/// Two-port admittance of one branch in per-unit:
/// `[I_from; I_to] = [[yff, yft], [ytf, ytt]] [V_from; V_to]`.
#[derive(Debug, Clone)]
pub struct BranchPrimitive {
    pub branch: usize,
    pub from_nodes: Vec<usize>,
    pub to_nodes: Vec<usize>,
    pub yff: CMat,
    pub yft: CMat,
    pub ytf: CMat,
    pub ytt: CMat,
}

#[derive(Debug, Clone)]
pub struct Ybus {
    pub nodes: NodeIndex,
    pub y: CMat,
    pub primitives: Vec<BranchPrimitive>,
    /// Constant shunt admittance per node (capacitors), already in `y`.
    pub shunts: Vec<(usize, Complex64)>,
}

fn to_cmat(m: &[Vec<Complex64>], scale: f64) -> CMat {
    let n = m.len();
    CMat::from_fn(n, n, |i, j| m[i][j] * scale)
}

/// Per-unit two-port blocks `(yff, yft, ytf, ytt)` of a branch.
pub fn branch_blocks(model: &FeederModel, branch: usize) -> Result<(CMat, CMat, CMat, CMat)> {
    let br = &model.branches[branch];
    let f = model.bus_index(&br.from_bus).expect("validated");
    let t = model.bus_index(&br.to_bus).expect("validated");
    let n = br.phases.len();
    match br.kind {
        BranchKind::Line | BranchKind::Switch => {
            let zb = model.z_base(f);
            let yser = to_cmat(&br.z, 1.0 / zb)
                .try_inverse()
                .ok_or_else(|| Error::Singular(format!("series impedance of branch `{}`", br.id)))?;
            let half = match &br.y {
                Some(y) => to_cmat(y, zb * 0.5),
                None => CMat::zeros(n, n),
            };
            Ok((&yser + &half, -&yser, -&yser, &yser + &half))
        }
        BranchKind::Transformer | BranchKind::Regulator => {
            let zb = model.z_base(t);
            let yser = to_cmat(&br.z, 1.0 / zb)
                .try_inverse()
                .ok_or_else(|| Error::Singular(format!("series impedance of branch `{}`", br.id)))?;
            let taps: Vec<f64> = if br.taps.is_empty() { vec![1.0; n] } else { br.taps.clone() };
            // ideal 1:t ratio on the from side, so V_to = t V_from at no load
            let tap = CMat::from_fn(n, n, |i, j| if i == j { Complex64::new(taps[i], 0.0) } else { Complex64::new(0.0, 0.0) });
            let yff = &tap * &yser * &tap;
            let yft = -(&tap * &yser);
            let ytf = -(&yser * &tap);
            Ok((yff, yft, ytf, yser))
        }
    }
}

/// Assembles the nodal admittance matrix over the energized node-phases.
pub fn build_ybus(model: &FeederModel, config: &SwitchConfig) -> Result<Ybus> {
    let view = apply_switch_config(model, config)?;
    let nodes = view.nodes.clone();
    let mut y = CMat::zeros(nodes.len(), nodes.len());
    let mut primitives = Vec::with_capacity(view.active_branches.len());
    for &b in &view.active_branches {
        let br = &model.branches[b];
        let f = model.bus_index(&br.from_bus).expect("validated");
        let t = model.bus_index(&br.to_bus).expect("validated");
        let from_nodes: Vec<usize> = br.phases.iter().map(|p| nodes.get(f, p).expect("energized")).collect();
        let to_nodes: Vec<usize> = br.phases.iter().map(|p| nodes.get(t, p).expect("energized")).collect();
        let (yff, yft, ytf, ytt) = branch_blocks(model, b)?;
        for (i, &ni) in from_nodes.iter().enumerate() {
            for (j, &nj) in from_nodes.iter().enumerate() {
                y[(ni, nj)] += yff[(i, j)];
            }
            for (j, &nj) in to_nodes.iter().enumerate() {
                y[(ni, nj)] += yft[(i, j)];
            }
        }
        for (i, &ni) in to_nodes.iter().enumerate() {
            for (j, &nj) in from_nodes.iter().enumerate() {
                y[(ni, nj)] += ytf[(i, j)];
            }
            for (j, &nj) in to_nodes.iter().enumerate() {
                y[(ni, nj)] += ytt[(i, j)];
            }
        }
        primitives.push(BranchPrimitive { branch: b, from_nodes, to_nodes, yff, yft, ytf, ytt });
    }
    let mut shunts = Vec::new();
    for cap in &model.capacitors {
        let bus = model.bus_index(&cap.bus).expect("validated");
        if !view.energized[bus] {
            continue;
        }
        let b_pu = cap.kvar_per_phase / model.phase_kva();
        for p in cap.phases.iter() {
            let k = nodes.get(bus, p).expect("energized");
            let ysh = Complex64::new(0.0, b_pu);
            y[(k, k)] += ysh;
            shunts.push((k, ysh));
        }
    }
    Ok(Ybus { nodes, y, primitives, shunts })
}
