//! Replay of a sequence of switching events: identify the topology from
//! live snapshots, fine-tune the state estimator when it changes, and
//! compare against the estimator that was never updated.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::dataset::{build_dataset, DatasetSpec};
use super::metrics::{mae_phase, mape_magnitude};
use super::models::{estimate_states, fine_tune, identify_topology, FineTuneConfig};
use crate::feeder::{FeederModel, SwitchConfig, TopologyCatalog};
use crate::loadmodel::{LoadPdf, SamplerConfig};
use crate::measerr::ErrorModelConfig;
use crate::nn::Checkpoint;
use crate::rng::{derive_seed, tags};
use crate::smd::PlacementPlan;
use crate::{Error, Result};

pub struct ScenarioContext<'a> {
    pub model: &'a FeederModel,
    pub catalog: &'a TopologyCatalog,
    pub pdfs: &'a BTreeMap<String, LoadPdf>,
    pub dsse_plan: &'a PlacementPlan,
    pub ti_plan: &'a PlacementPlan,
    pub ti: &'a Checkpoint,
    /// Estimator trained on the first topology of the script.
    pub dsse: &'a Checkpoint,
    pub error: ErrorModelConfig,
    pub sampler: SamplerConfig,
    pub snapshots: usize,
    pub fine_tune_rows: usize,
    pub fine_tune: FineTuneConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: usize,
    pub true_topology: String,
    pub identified_topology: String,
    pub ti_correct: bool,
    /// Share of snapshots classified correctly, percent.
    pub ti_snapshot_accuracy_pct: f64,
    pub fine_tuned: bool,
    pub fine_tune_seconds: f64,
    pub angle_mae_adaptive_deg: f64,
    pub angle_mae_frozen_deg: f64,
    pub magnitude_mape_adaptive_pct: f64,
    pub magnitude_mape_frozen_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub script: Vec<String>,
    pub steps: Vec<StepReport>,
}

impl ScenarioReport {
    pub fn fine_tune_count(&self) -> usize {
        self.steps.iter().filter(|s| s.fine_tuned).count()
    }

    pub fn table(&self) -> String {
        let mut s = String::from("step  true  identified  TI ok  fine-tuned  ft time [s]  MAE tuned [deg]  MAE frozen [deg]\n");
        for r in &self.steps {
            s.push_str(&format!(
                "{:<5} {:<5} {:<11} {:<6} {:<11} {:<12.2} {:<16.4} {:.4}\n",
                r.step,
                r.true_topology,
                r.identified_topology,
                if r.ti_correct { "yes" } else { "no" },
                if r.fine_tuned { "yes" } else { "no" },
                r.fine_tune_seconds,
                r.angle_mae_adaptive_deg,
                r.angle_mae_frozen_deg
            ));
        }
        s
    }
}

fn majority(ids: &[usize], k: usize) -> usize {
    let mut counts = vec![0usize; k];
    ids.iter().for_each(|&i| counts[i] += 1);
    let mut best = 0;
    for (i, c) in counts.iter().enumerate() {
        if *c > counts[best] {
            best = i;
        }
    }
    best
}

pub fn run_scenario(script: &[SwitchConfig], ctx: &ScenarioContext<'_>) -> Result<ScenarioReport> {
    if script.is_empty() {
        return Err(Error::Invalid("scenario script is empty".into()));
    }
    for c in script {
        if ctx.catalog.index_of(c).is_none() {
            return Err(Error::Unknown { kind: "topology in catalog", id: c.bits() });
        }
    }
    let fp = ctx.model.fingerprint();
    let all = ctx.catalog.configs.clone();
    let mut base = ctx.catalog.index_of(&script[0]).expect("checked");
    let mut current = ctx.dsse.clone();
    let mut steps = Vec::with_capacity(script.len());
    for (s, truth) in script.iter().enumerate() {
        let seed = derive_seed(ctx.seed, tags::LOADS, 1000 + s as u64);
        let sampler = SamplerConfig { master_seed: seed, ..ctx.sampler };
        let mut ti_spec = DatasetSpec::ti(vec![truth.clone()], ctx.snapshots, seed, ctx.error.clone());
        ti_spec.layout_topologies = all.clone();
        ti_spec.sampler = sampler;
        let mut ds_spec = DatasetSpec::dsse(truth.clone(), ctx.snapshots, seed, ctx.error.clone());
        ds_spec.layout_topologies = all.clone();
        ds_spec.sampler = sampler;
        let live_ti = build_dataset(ctx.model, ctx.pdfs, ctx.ti_plan, &ti_spec)?;
        let live = build_dataset(ctx.model, ctx.pdfs, ctx.dsse_plan, &ds_spec)?;

        let true_idx = ctx.catalog.index_of(truth).expect("checked");
        let ids: Vec<usize> = identify_topology(ctx.ti, &fp, &live_ti.x)?.into_iter().map(|(i, _)| i).collect();
        let hits = ids.iter().filter(|&&i| i == true_idx).count();
        let identified = majority(&ids, ctx.catalog.len());

        let mut fine_tuned = false;
        let mut ft_seconds = 0.0;
        if identified != base {
            let start = Instant::now();
            let ft_seed = derive_seed(ctx.seed, tags::LOADS, 2000 + s as u64);
            let mut spec = DatasetSpec::dsse(all[identified].clone(), ctx.fine_tune_rows, ft_seed, ctx.error.clone());
            spec.layout_topologies = all.clone();
            let ds = build_dataset(ctx.model, ctx.pdfs, ctx.dsse_plan, &spec)?;
            let (ck, _, _) = fine_tune(&current, &ds, &FineTuneConfig { seed: ft_seed, ..ctx.fine_tune.clone() })?;
            current = ck;
            base = identified;
            fine_tuned = true;
            ft_seconds = start.elapsed().as_secs_f64();
        }
        let est = estimate_states(&current, &fp, &live.x)?;
        let frozen = estimate_states(ctx.dsse, &fp, &live.x)?;
        steps.push(StepReport {
            step: s,
            true_topology: truth.bits(),
            identified_topology: all[identified].bits(),
            ti_correct: identified == true_idx,
            ti_snapshot_accuracy_pct: 100.0 * hits as f64 / ids.len() as f64,
            fine_tuned,
            fine_tune_seconds: ft_seconds,
            angle_mae_adaptive_deg: mae_phase(&est, &live.y)?,
            angle_mae_frozen_deg: mae_phase(&frozen, &live.y)?,
            magnitude_mape_adaptive_pct: mape_magnitude(&est, &live.y)?.0,
            magnitude_mape_frozen_pct: mape_magnitude(&frozen, &live.y)?.0,
        });
    }
    Ok(ScenarioReport { script: script.iter().map(SwitchConfig::bits).collect(), steps })
}
