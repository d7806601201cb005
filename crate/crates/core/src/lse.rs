//! Linear weighted-least-squares state estimation in rectangular
//! coordinates, the classical baseline for the learned estimators.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::feeder::{build_ybus, FeederModel, NodeIndex, Phase, SwitchConfig, Ybus};
use crate::measerr::{apply_gaussian_tve, Quantity, TveSpec};
use crate::phasor::Phasor;
use crate::powerflow::PowerFlowSolution;
use crate::rng::Rng;
use crate::smd::{candidate_locations, read_channels, PlacementPlan, Purpose, SmdLocation};
use crate::{Error, Result};

const RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Re,
    Im,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementRow {
    pub smd: String,
    pub quantity: Quantity,
    pub phase: Phase,
    pub part: Part,
}

/// `z = H x` with `x = [Re V0, Im V0, Re V1, ...]` over the energized
/// node-phases in canonical order. Rows come in (Re, Im) pairs, one pair
/// per measured phasor.
#[derive(Debug, Clone)]
pub struct LinearMeasurementModel {
    pub nodes: NodeIndex,
    pub h: DMatrix<f64>,
    pub rows: Vec<MeasurementRow>,
    /// Devices in the order their channels appear in `rows`.
    pub smds: Vec<SmdLocation>,
}

impl LinearMeasurementModel {
    pub fn state_width(&self) -> usize {
        2 * self.nodes.len()
    }

    /// Noiseless measurement vector of a solved operating point.
    pub fn measure(&self, model: &FeederModel, sol: &PowerFlowSolution) -> Vec<Complex64> {
        self.smds.iter().flat_map(|s| read_channels(model, s, sol)).filter_map(|c| c.value).collect()
    }

    /// Stacked rectangular measurement vector of phasors.
    pub fn stack(phasors: &[Complex64]) -> DVector<f64> {
        DVector::from_iterator(2 * phasors.len(), phasors.iter().flat_map(|z| [z.re, z.im]))
    }

    /// Inverse per-axis TVE variance of each row, from the magnitude of the
    /// measured phasor.
    pub fn tve_weights(phasors: &[Complex64], tve: &TveSpec) -> Vec<f64> {
        phasors
            .iter()
            .flat_map(|z| {
                let w = 1.0 / tve.sigma(z.norm()).max(1e-12).powi(2);
                [w, w]
            })
            .collect()
    }
}

fn add_complex(h: &mut DMatrix<f64>, row: usize, col_node: usize, a: Complex64) {
    h[(row, 2 * col_node)] += a.re;
    h[(row, 2 * col_node + 1)] -= a.im;
    h[(row + 1, 2 * col_node)] += a.im;
    h[(row + 1, 2 * col_node + 1)] += a.re;
}

fn location_rows(model: &FeederModel, ybus: &Ybus, loc: &SmdLocation) -> Result<Vec<(MeasurementRow, Vec<(usize, Complex64)>)>> {
    loc.validate(model)?;
    let id = loc.id(model);
    let bus = model.bus_index(&loc.bus).expect("validated");
    let bi = model.branch_index(&loc.branch).expect("validated");
    let br = &model.branches[bi];
    let mut out = Vec::new();
    let mut push = |q, p, coeffs: Vec<(usize, Complex64)>| {
        out.push((MeasurementRow { smd: id.clone(), quantity: q, phase: p, part: Part::Re }, coeffs));
    };
    for p in loc.voltage_phases.iter() {
        if let Some(k) = ybus.nodes.get(bus, p) {
            push(Quantity::Voltage, p, vec![(k, Complex64::new(1.0, 0.0))]);
        }
    }
    if let Some(prim) = ybus.primitives.iter().find(|q| q.branch == bi) {
        let at_from = br.from_bus == loc.bus;
        let (near, far) = if at_from { (&prim.yff, &prim.yft) } else { (&prim.ytt, &prim.ytf) };
        let (near_nodes, far_nodes) = if at_from { (&prim.from_nodes, &prim.to_nodes) } else { (&prim.to_nodes, &prim.from_nodes) };
        for p in loc.current_phases.iter() {
            let Some(r) = br.phases.position(p) else { continue };
            let mut coeffs = Vec::new();
            for j in 0..near_nodes.len() {
                coeffs.push((near_nodes[j], near[(r, j)]));
                coeffs.push((far_nodes[j], far[(r, j)]));
            }
            push(Quantity::Current, p, coeffs);
        }
    }
    Ok(out)
}

fn assemble(nodes: &NodeIndex, rows: Vec<(MeasurementRow, Vec<(usize, Complex64)>)>) -> (DMatrix<f64>, Vec<MeasurementRow>) {
    let mut h = DMatrix::zeros(2 * rows.len(), 2 * nodes.len());
    let mut labels = Vec::with_capacity(2 * rows.len());
    for (i, (label, coeffs)) in rows.into_iter().enumerate() {
        for (k, a) in coeffs {
            add_complex(&mut h, 2 * i, k, a);
        }
        labels.push(label.clone());
        labels.push(MeasurementRow { part: Part::Im, ..label });
    }
    (h, labels)
}

/// Measurement matrix of a placement under one topology. Devices are taken
/// in plan order; channels on out-of-service equipment give no rows.
pub fn build_h(model: &FeederModel, config: &SwitchConfig, plan: &PlacementPlan) -> Result<LinearMeasurementModel> {
    let ybus = build_ybus(model, config)?;
    let smds: Vec<SmdLocation> = plan.smds.iter().map(|s| s.location.clone()).collect();
    let mut rows = Vec::new();
    for s in &smds {
        rows.extend(location_rows(model, &ybus, s)?);
    }
    let (h, rows) = assemble(&ybus.nodes, rows);
    Ok(LinearMeasurementModel { nodes: ybus.nodes, h, rows, smds })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservabilityReport {
    pub observable: bool,
    pub rank: usize,
    pub deficiency: usize,
    /// State columns (node-phase index) touched by the null space.
    pub unobservable_nodes: Vec<usize>,
}

/// Numeric column rank of `H` (singular values above 1e-8 of the largest).
pub fn observability_check(h: &DMatrix<f64>) -> ObservabilityReport {
    let cols = h.ncols();
    if h.nrows() == 0 || cols == 0 {
        return ObservabilityReport { observable: cols == 0, rank: 0, deficiency: cols, unobservable_nodes: (0..cols / 2).collect() };
    }
    // zero rows make V square so the whole null space is available
    let padded = if h.nrows() < cols { h.clone().resize_vertically(cols, 0.0) } else { h.clone() };
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let top = svd.singular_values.max();
    let null: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] <= RANK_TOL * top).collect();
    let mut touched = vec![false; cols / 2];
    for &i in &null {
        for c in 0..cols {
            if vt[(i, c)].abs() > 1e-6 {
                touched[c / 2] = true;
            }
        }
    }
    let rank = cols - null.len();
    ObservabilityReport {
        observable: null.is_empty(),
        rank,
        deficiency: null.len(),
        unobservable_nodes: (0..cols / 2).filter(|&k| touched[k]).collect(),
    }
}

/// Orthonormal basis of a growing row space.
struct RowBasis {
    basis: Vec<DVector<f64>>,
    scale: f64,
}

impl RowBasis {
    fn residual(&self, r: &DVector<f64>) -> DVector<f64> {
        let mut v = r.clone();
        // two passes keep the projection numerically clean
        for _ in 0..2 {
            for q in &self.basis {
                let d = q.dot(&v);
                v.axpy(-d, q, 1.0);
            }
        }
        v
    }

    /// Rank gained by adding `rows`, optionally keeping them.
    fn gain(&mut self, rows: &[DVector<f64>], keep: bool) -> usize {
        let start = self.basis.len();
        for r in rows {
            let v = self.residual(r);
            let n = v.norm();
            if n > RANK_TOL * self.scale.max(r.norm()) {
                self.basis.push(v / n);
            }
        }
        let g = self.basis.len() - start;
        if !keep {
            self.basis.truncate(start);
        }
        g
    }
}

/// Greedy stand-in for an optimal observability placement: keep adding the
/// candidate whose rows raise the rank of `H` the most (ties to the smaller
/// location id) until every node-phase is observable.
pub fn greedy_observability_placement(model: &FeederModel, config: &SwitchConfig) -> Result<PlacementPlan> {
    let ybus = build_ybus(model, config)?;
    let target = 2 * ybus.nodes.len();
    let candidates: Vec<(String, SmdLocation, Vec<DVector<f64>>)> = candidate_locations(model)
        .into_iter()
        .filter_map(|loc| {
            let rows = location_rows(model, &ybus, &loc).ok()?;
            if rows.is_empty() {
                return None;
            }
            let (h, _) = assemble(&ybus.nodes, rows);
            let vecs = (0..h.nrows()).map(|i| h.row(i).transpose()).collect();
            Some((loc.id(model), loc, vecs))
        })
        .collect();
    let scale = candidates.iter().flat_map(|c| c.2.iter().map(|r| r.norm())).fold(0.0, f64::max);
    let mut basis = RowBasis { basis: Vec::new(), scale };
    let mut chosen: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    while basis.basis.len() < target {
        let mut best: Option<(usize, usize)> = None;
        for (i, c) in candidates.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            let g = basis.gain(&c.2, false);
            if g > 0 && best.is_none_or(|(_, bg)| g > bg) {
                best = Some((i, g));
            }
        }
        let Some((i, g)) = best else {
            return Err(Error::Unobservable(target - basis.basis.len()));
        };
        basis.gain(&candidates[i].2, true);
        chosen.push(i);
        trace.push(format!("add {} (+{} rank, {}/{})", candidates[i].0, g, basis.basis.len(), target));
    }
    let mut plan = PlacementPlan::from_locations(chosen.iter().map(|&i| candidates[i].1.clone()).collect(), Purpose::Dsse);
    plan.trace = trace;
    plan.target_met = true;
    Ok(plan)
}

#[derive(Debug, Clone)]
pub struct LseEstimate {
    pub v: Vec<Complex64>,
    /// Weighted residual norm `sqrt((z - Hx)^T W (z - Hx))`.
    pub residual: f64,
}

impl LseEstimate {
    pub fn phasors(&self) -> Vec<Phasor> {
        self.v.iter().map(|&z| Phasor::from_complex(z)).collect()
    }
}

/// Normal-equation gain matrix `H^T W H`.
pub fn gain_matrix(h: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut hw = h.clone();
    for (i, mut row) in hw.row_iter_mut().enumerate() {
        row *= w[i];
    }
    h.transpose() * hw
}

/// Weighted least squares through a Cholesky factorization of the gain.
pub fn solve_wls(h: &DMatrix<f64>, w: &[f64], z: &DVector<f64>) -> Result<LseEstimate> {
    if w.len() != h.nrows() || z.len() != h.nrows() {
        return Err(Error::Shape { expected: format!("{} rows", h.nrows()), got: format!("{} weights, {} measurements", w.len(), z.len()) });
    }
    if w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::Invalid("weights must be positive".into()));
    }
    let g = gain_matrix(h, w);
    let d = DVector::from_iterator(g.nrows(), g.diagonal().iter().map(|&x| if x > 0.0 { 1.0 / x.sqrt() } else { 1.0 }));
    let scaled = DMatrix::from_fn(g.nrows(), g.ncols(), |i, j| g[(i, j)] * d[i] * d[j]);
    let chol = scaled.cholesky().ok_or_else(|| Error::Unobservable(observability_check(h).deficiency.max(1)))?;
    let weighted = |r: &DVector<f64>| DVector::from_iterator(r.len(), r.iter().zip(w).map(|(a, b)| a * b));
    let step = |rhs: DVector<f64>| chol.solve(&rhs.component_mul(&d)).component_mul(&d);
    let mut x = step(h.transpose() * weighted(z));
    // one refinement pass recovers most of what squaring the condition costs
    x += step(h.transpose() * weighted(&(z - h * &x)));
    let r = z - h * &x;
    let residual = r.iter().zip(w).map(|(a, b)| a * a * b).sum::<f64>().sqrt();
    let v = (0..x.len() / 2).map(|k| Complex64::new(x[2 * k], x[2 * k + 1])).collect();
    Ok(LseEstimate { v, residual })
}

/// One noisy estimate: Gaussian TVE noise on the noiseless channels, TVE
/// weights from the noisy values, then WLS.
pub fn estimate_with_noise(model: &FeederModel, lmm: &LinearMeasurementModel, sol: &PowerFlowSolution, tve: &TveSpec, rng: &mut Rng) -> Result<LseEstimate> {
    let clean = lmm.measure(model, sol);
    let noisy: Vec<Complex64> = clean.iter().map(|&x| apply_gaussian_tve(x, tve, rng).0).collect();
    let w = LinearMeasurementModel::tve_weights(&noisy, tve);
    solve_wls(&lmm.h, &w, &LinearMeasurementModel::stack(&noisy))
}
