//! Monte-Carlo operating points drawn from the group demand densities.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::kde::LoadPdf;
use crate::feeder::FeederModel;
use crate::powerflow::Injections;
use crate::rng::{self, Rng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub pf_range: [f64; 2],
    pub dg_variation: [f64; 2],
    pub master_seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { pf_range: [0.95, 1.0], dg_variation: [0.5, 1.5], master_seed: 0 }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let [a, b] = self.pf_range;
        if !(a > 0.0 && a <= b && b <= 1.0) {
            return Err(Error::Invalid(format!("pf range [{a}, {b}] must lie within (0, 1]")));
        }
        let [c, d] = self.dg_variation;
        if !(c > 0.0 && c <= d) {
            return Err(Error::Invalid(format!("dg variation [{c}, {d}] must be positive")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub index: u64,
    pub injections: Injections,
    pub load_pf: Vec<f64>,
    pub dg_pf: Vec<f64>,
}

fn uniform(rng: &mut Rng, [a, b]: [f64; 2]) -> f64 {
    if a == b { a } else { rng.random_range(a..=b) }
}

fn q_from_pf(p: f64, pf: f64) -> f64 {
    p * pf.acos().tan()
}

fn nonnegative_draw(pdf: &LoadPdf, rng: &mut Rng) -> f64 {
    for _ in 0..1000 {
        let x = pdf.sample(rng);
        if x >= 0.0 {
            return x;
        }
    }
    0.0
}

/// Scenario `index` depends only on the master seed and the index.
pub fn sample_scenario(pdfs: &BTreeMap<String, LoadPdf>, model: &FeederModel, cfg: &SamplerConfig, index: u64) -> Result<Scenario> {
    cfg.validate()?;
    let mut rng = rng::stream(cfg.master_seed, rng::tags::LOADS, index);
    let mut group_nominal: BTreeMap<&str, f64> = BTreeMap::new();
    for l in &model.loads {
        if let Some(g) = &l.meter_group {
            *group_nominal.entry(g).or_default() += l.nominal_p_kw();
        }
    }
    let mut group_p = BTreeMap::new();
    for g in group_nominal.keys() {
        let pdf = pdfs.get(*g).ok_or_else(|| Error::Unknown { kind: "load PDF for group", id: g.to_string() })?;
        group_p.insert(*g, nonnegative_draw(pdf, &mut rng));
    }
    let mut loads = Vec::with_capacity(model.loads.len());
    let mut load_pf = Vec::with_capacity(model.loads.len());
    for l in &model.loads {
        let nominal = l.nominal_p_kw();
        let p_total = match &l.meter_group {
            Some(g) => {
                let share = if group_nominal[g.as_str()] > 0.0 { nominal / group_nominal[g.as_str()] } else { 0.0 };
                group_p[g.as_str()] * share
            }
            None => nominal * uniform(&mut rng, cfg.dg_variation),
        };
        let pf = uniform(&mut rng, cfg.pf_range);
        load_pf.push(pf);
        loads.push(
            l.per_phase
                .iter()
                .map(|c| {
                    let p = if nominal > 0.0 { p_total * c.p_kw / nominal } else { 0.0 };
                    Complex64::new(p, q_from_pf(p, pf))
                })
                .collect(),
        );
    }
    let mut dgs = Vec::with_capacity(model.dgs.len());
    let mut dg_pf = Vec::with_capacity(model.dgs.len());
    for d in &model.dgs {
        let p = d.rating_kw * uniform(&mut rng, cfg.dg_variation);
        let pf = uniform(&mut rng, cfg.pf_range);
        dg_pf.push(pf);
        dgs.push(Complex64::new(p, q_from_pf(p, pf)));
    }
    Ok(Scenario { index, injections: Injections { loads, dgs }, load_pf, dg_pf })
}

pub fn sample_loads(pdfs: &BTreeMap<String, LoadPdf>, model: &FeederModel, cfg: &SamplerConfig, n: usize) -> Result<Vec<Scenario>> {
    (0..n as u64).map(|i| sample_scenario(pdfs, model, cfg, i)).collect()
}

/// Densities centered on each group's nameplate demand, for quick runs
/// without meter data.
pub fn nominal_pdfs(model: &FeederModel, spread: f64) -> BTreeMap<String, LoadPdf> {
    let mut nominal: BTreeMap<String, f64> = BTreeMap::new();
    for l in &model.loads {
        if let Some(g) = &l.meter_group {
            *nominal.entry(g.clone()).or_default() += l.nominal_p_kw();
        }
    }
    nominal
        .into_iter()
        .map(|(g, p)| {
            let h = (spread * p).max(super::kde::BANDWIDTH_FLOOR);
            let pdf = LoadPdf::new(g.clone(), vec![p], h).expect("positive bandwidth");
            (g, pdf)
        })
        .collect()
}
