//! Where to put synchrophasor devices: greedy forward selection for
//! topology identification, voltage clustering plus observability index
//! for state estimation, and the combination of both.

mod cluster;
mod svm;

pub use cluster::{average_ranks, cluster_voltages, spearman_matrix, Linkage, SpearmanMatrix};
pub use svm::{LinearOvr, SvmConfig};

use std::collections::{BTreeMap, VecDeque};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::feeder::{apply_switch_config, FeederModel, TopologyCatalog};
use crate::loadmodel::{sample_scenario, LoadPdf, SamplerConfig};
use crate::measerr::Quantity;
use crate::nn::Mat;
use crate::phasor::Phasor;
use crate::powerflow::{PowerFlowOptions, PowerFlowSolver};
use crate::rng;
use crate::smd::{candidate_locations, read_channels, PlacedSmd, PlacementPlan, Purpose, SmdLocation};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SfsConfig {
    /// Target validation accuracy in percent.
    pub alpha: f64,
    pub budget: usize,
    pub rows_per_topology: usize,
    pub seed: u64,
    pub svm_lambda: f64,
    pub svm_epochs: usize,
}

impl Default for SfsConfig {
    fn default() -> Self {
        Self { alpha: 97.0, budget: 6, rows_per_topology: 200, seed: 0, svm_lambda: 1e-4, svm_epochs: 30 }
    }
}

/// Noiseless current features of every candidate, one block per candidate.
struct CurrentBlocks {
    blocks: Vec<Mat>,
    labels: Vec<usize>,
}

fn current_blocks(
    model: &FeederModel,
    catalog: &TopologyCatalog,
    pdfs: &BTreeMap<String, LoadPdf>,
    candidates: &[SmdLocation],
    rows: usize,
    sampler: &SamplerConfig,
) -> Result<CurrentBlocks> {
    let mut data: Vec<Vec<f64>> = candidates.iter().map(|_| Vec::new()).collect();
    let mut labels = Vec::new();
    for (t, config) in catalog.configs.iter().enumerate() {
        let solver = PowerFlowSolver::new(model, config, PowerFlowOptions::default())?;
        let mut made = 0;
        let mut draw = (t * rows) as u64;
        while made < rows {
            let scen = sample_scenario(pdfs, model, sampler, draw)?;
            draw += 1 << 40;
            let sol = solver.solve(&scen.injections)?;
            if !sol.converged {
                continue;
            }
            draw = (t * rows + made + 1) as u64;
            for (c, loc) in candidates.iter().enumerate() {
                for ch in read_channels(model, loc, &sol).into_iter().filter(|c| c.quantity == Quantity::Current) {
                    match ch.value {
                        Some(v) => {
                            let p = Phasor::from_complex(v);
                            data[c].extend([p.magnitude, p.angle_deg]);
                        }
                        None => data[c].extend([0.0, 0.0]),
                    }
                }
            }
            labels.push(t);
            made += 1;
        }
    }
    let n = labels.len();
    let blocks = candidates
        .iter()
        .zip(data)
        .map(|(loc, d)| Mat::from_vec(n, 2 * loc.current_phases.len(), d))
        .collect::<Result<Vec<_>>>()?;
    Ok(CurrentBlocks { blocks, labels })
}

fn hstack(blocks: &[&Mat]) -> Mat {
    let rows = blocks.first().map_or(0, |b| b.rows);
    let cols = blocks.iter().map(|b| b.cols).sum();
    let mut out = Mat::zeros(rows, cols);
    for r in 0..rows {
        let mut c0 = 0;
        for b in blocks {
            out.row_mut(r)[c0..c0 + b.cols].copy_from_slice(b.row(r));
            c0 += b.cols;
        }
    }
    out
}

/// Greedy forward selection of current-measurement sites for topology
/// identification. Each step adds the candidate whose current block gives
/// the best validation accuracy of a linear classifier; the classifier kept
/// for a step is the better of the new fit and the previous one, so the
/// accuracy trace never decreases.
pub fn sfs_ti(
    model: &FeederModel,
    catalog: &TopologyCatalog,
    pdfs: &BTreeMap<String, LoadPdf>,
    candidates: &[SmdLocation],
    cfg: &SfsConfig,
    sampler: &SamplerConfig,
) -> Result<(PlacementPlan, Vec<f64>)> {
    if candidates.is_empty() {
        return Err(Error::Invalid("no candidate SMD locations".into()));
    }
    if catalog.len() < 2 {
        return Err(Error::Invalid("topology identification needs at least two feasible topologies".into()));
    }
    let data = current_blocks(model, catalog, pdfs, candidates, cfg.rows_per_topology, sampler)?;
    let mut order: Vec<usize> = (0..data.labels.len()).collect();
    order.shuffle(&mut rng::stream(cfg.seed, rng::tags::SPLIT, 3));
    let n_train = (order.len() as f64 * 0.7).round() as usize;
    let (tr, va) = order.split_at(n_train);
    let ytr: Vec<usize> = tr.iter().map(|&i| data.labels[i]).collect();
    let yva: Vec<usize> = va.iter().map(|&i| data.labels[i]).collect();
    let svm = SvmConfig { lambda: cfg.svm_lambda, epochs: cfg.svm_epochs, seed: cfg.seed };
    let k = catalog.len();

    let mut chosen: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    let mut lines = Vec::new();
    let mut best_acc = 0.0;
    let budget = cfg.budget.max(1);
    while chosen.len() < budget && chosen.len() < candidates.len() {
        let mut step_best: Option<(usize, f64)> = None;
        for c in 0..candidates.len() {
            if chosen.contains(&c) {
                continue;
            }
            let set: Vec<&Mat> = chosen.iter().chain(std::iter::once(&c)).map(|&i| &data.blocks[i]).collect();
            let x = hstack(&set);
            let model_c = LinearOvr::fit(&x.select_rows(tr), &ytr, k, &svm);
            let acc = model_c.accuracy(&x.select_rows(va), &yva);
            if step_best.is_none_or(|(_, a)| acc > a) {
                step_best = Some((c, acc));
            }
        }
        let (c, acc) = step_best.expect("at least one remaining candidate");
        chosen.push(c);
        best_acc = f64::max(best_acc, acc);
        trace.push(best_acc);
        lines.push(format!("step {}: add {} -> validation accuracy {:.2}%", chosen.len(), candidates[c].id(model), best_acc));
        if best_acc >= cfg.alpha {
            break;
        }
    }
    let mut plan = PlacementPlan::from_locations(chosen.iter().map(|&c| candidates[c].clone()).collect(), Purpose::Ti);
    plan.trace = lines;
    plan.target_met = best_acc >= cfg.alpha;
    Ok((plan, trace))
}

/// Which part of the node voltage phasor is rank-correlated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterSignal {
    Magnitude,
    #[default]
    Angle,
}

/// Node-phase voltage series over sampled operating points of the base
/// topology, in canonical node order.
pub fn voltage_series(
    model: &FeederModel,
    pdfs: &BTreeMap<String, LoadPdf>,
    scenarios: usize,
    signal: ClusterSignal,
    sampler: &SamplerConfig,
) -> Result<(Vec<(usize, crate::feeder::Phase)>, Vec<Vec<f64>>)> {
    let config = model.base_config();
    let solver = PowerFlowSolver::new(model, &config, PowerFlowOptions::default())?;
    let nodes: Vec<_> = solver.nodes().iter().collect();
    let mut series = vec![Vec::with_capacity(scenarios); nodes.len()];
    let mut i = 0u64;
    while series[0].len() < scenarios {
        let sol = solver.solve(&sample_scenario(pdfs, model, sampler, i)?.injections)?;
        i += 1;
        if !sol.converged {
            continue;
        }
        for (s, v) in series.iter_mut().zip(&sol.v) {
            s.push(match signal {
                ClusterSignal::Magnitude => v.norm(),
                ClusterSignal::Angle => v.arg(),
            });
        }
    }
    Ok((nodes, series))
}

/// Bus-level clusters. Node-phases are clustered separately for each phase,
/// since magnitudes of different phases mostly differ by load imbalance, and
/// buses that share a phase cluster end up together. Buses whose voltages
/// never vary join the cluster of the nearest bus that does.
pub fn node_clusters(model: &FeederModel, nodes: &[(usize, crate::feeder::Phase)], m: &SpearmanMatrix, tau: f64, linkage: Linkage) -> Vec<Vec<String>> {
    let mut parent: Vec<usize> = (0..model.buses.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut varying = vec![false; model.buses.len()];
    for phase in crate::feeder::Phase::ALL {
        let live: Vec<usize> = (0..nodes.len()).filter(|&i| nodes[i].1 == phase && !m.constant[i]).collect();
        let sub: Vec<Vec<f64>> = live.iter().map(|&i| live.iter().map(|&j| m.rho[i][j]).collect()).collect();
        for members in cluster_voltages(&sub, tau, linkage) {
            let first = nodes[live[members[0]]].0;
            for &k in &members {
                let bus = nodes[live[k]].0;
                varying[bus] = true;
                let (ra, rb) = (find(&mut parent, first), find(&mut parent, bus));
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut bus_cluster: Vec<Option<usize>> = (0..model.buses.len()).map(|b| varying[b].then(|| find(&mut parent, b))).collect();
    let energized: std::collections::BTreeSet<usize> = nodes.iter().map(|n| n.0).collect();
    let mut adj: Vec<Vec<usize>> = vec![vec![]; model.buses.len()];
    let active = apply_switch_config(model, &model.base_config()).map(|v| v.active_branches).unwrap_or_default();
    for &b in &active {
        let br = &model.branches[b];
        let (f, t) = (model.bus_index(&br.from_bus).unwrap(), model.bus_index(&br.to_bus).unwrap());
        adj[f].push(t);
        adj[t].push(f);
    }
    for &bus in &energized {
        if bus_cluster[bus].is_some() {
            continue;
        }
        let mut seen = vec![false; model.buses.len()];
        let mut q = VecDeque::from([bus]);
        seen[bus] = true;
        while let Some(u) = q.pop_front() {
            if let Some(c) = varying[u].then_some(bus_cluster[u]).flatten() {
                bus_cluster[bus] = Some(c);
                break;
            }
            for &w in &adj[u] {
                if !seen[w] {
                    seen[w] = true;
                    q.push_back(w);
                }
            }
        }
    }
    let mut out: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for &bus in &energized {
        if let Some(c) = bus_cluster[bus] {
            out.entry(c).or_default().push(model.buses[bus].id.clone());
        }
    }
    let mut out: Vec<Vec<String>> = out.into_values().collect();
    out.retain(|c| !c.is_empty());
    out.sort();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratedConfig {
    pub sfs: SfsConfig,
    pub tau: f64,
    pub linkage: Linkage,
    pub signal: ClusterSignal,
    pub cluster_scenarios: usize,
}

impl Default for IntegratedConfig {
    fn default() -> Self {
        Self { sfs: SfsConfig::default(), tau: 0.05, linkage: Linkage::default(), signal: ClusterSignal::default(), cluster_scenarios: 500 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratedPlacement {
    pub plan: PlacementPlan,
    pub clusters: Vec<Vec<String>>,
    pub ti_accuracy_trace: Vec<f64>,
}

/// Highest-POI candidate among those at buses in `cluster`; ties go to the
/// smaller location id.
pub fn max_poi_location(model: &FeederModel, candidates: &[SmdLocation], cluster: &[String]) -> Option<SmdLocation> {
    let mut best: Option<(usize, String, &SmdLocation)> = None;
    for c in candidates.iter().filter(|c| cluster.contains(&c.bus)) {
        let (poi, id) = (c.poi(), c.id(model));
        if best.as_ref().is_none_or(|(p, i, _)| poi > *p || (poi == *p && id < *i)) {
            best = Some((poi, id, c));
        }
    }
    best.map(|b| b.2.clone())
}

/// Forward selection for topology identification (when there is more than
/// one feasible topology), then one max-POI device in every voltage cluster
/// that has no device yet.
pub fn integrated_placement(
    model: &FeederModel,
    catalog: &TopologyCatalog,
    pdfs: &BTreeMap<String, LoadPdf>,
    cfg: &IntegratedConfig,
    sampler: &SamplerConfig,
) -> Result<IntegratedPlacement> {
    let candidates = candidate_locations(model);
    let (mut plan, trace) = if catalog.len() > 1 {
        sfs_ti(model, catalog, pdfs, &candidates, &cfg.sfs, sampler)?
    } else {
        (PlacementPlan::default(), vec![])
    };
    let (nodes, series) = voltage_series(model, pdfs, cfg.cluster_scenarios, cfg.signal, sampler)?;
    let m = spearman_matrix(&series)?;
    let clusters = node_clusters(model, &nodes, &m, cfg.tau, cfg.linkage);
    for (k, cluster) in clusters.iter().enumerate() {
        if plan.smds.iter().any(|s| cluster.contains(&s.location.bus)) {
            plan.trace.push(format!("cluster {k}: already covered"));
            continue;
        }
        if let Some(loc) = max_poi_location(model, &candidates, cluster) {
            plan.trace.push(format!("cluster {k}: add {} (POI {})", loc.id(model), loc.poi()));
            plan.smds.push(PlacedSmd { location: loc, purpose: Purpose::Dsse });
        }
    }
    Ok(IntegratedPlacement { plan, clusters, ti_accuracy_trace: trace })
}
