//! Simulated training sets: sampled operating points, power flows, noisy
//! device readings and the true states or topology labels.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layout::{FeatureLayout, StateLayout};
use crate::feeder::{FeederModel, SwitchConfig};
use crate::loadmodel::{sample_scenario, LoadPdf, SamplerConfig};
use crate::measerr::ErrorModelConfig;
use crate::nn::Mat;
use crate::powerflow::{PowerFlowOptions, PowerFlowSolver};
use crate::rng;
use crate::smd::PlacementPlan;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Dsse,
    Ti,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub kind: TaskKind,
    /// Configurations to simulate; the class label is the position here.
    pub topologies: Vec<SwitchConfig>,
    /// Configurations the feature layout must cover (defaults to `topologies`).
    #[serde(default)]
    pub layout_topologies: Vec<SwitchConfig>,
    pub rows_per_topology: usize,
    pub seed: u64,
    pub error: ErrorModelConfig,
    pub sampler: SamplerConfig,
    /// Topology identification inputs include voltage channels.
    #[serde(default)]
    pub ti_all_channels: bool,
    #[serde(default = "one")]
    pub workers: usize,
}

fn one() -> usize {
    1
}

impl DatasetSpec {
    pub fn dsse(config: SwitchConfig, rows: usize, seed: u64, error: ErrorModelConfig) -> Self {
        Self {
            kind: TaskKind::Dsse,
            topologies: vec![config],
            layout_topologies: vec![],
            rows_per_topology: rows,
            seed,
            error,
            sampler: SamplerConfig { master_seed: seed, ..Default::default() },
            ti_all_channels: false,
            workers: 1,
        }
    }

    pub fn ti(topologies: Vec<SwitchConfig>, rows: usize, seed: u64, error: ErrorModelConfig) -> Self {
        Self { kind: TaskKind::Ti, topologies, ..Self::dsse(SwitchConfig::new(vec![]), rows, seed, error) }
    }

    fn include_voltages(&self) -> bool {
        self.kind == TaskKind::Dsse || self.ti_all_channels
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub kind: TaskKind,
    pub feeder_fingerprint: String,
    pub placement: Vec<String>,
    pub spec: DatasetSpec,
    /// Class index to switch bits.
    pub label_map: Vec<String>,
    pub feature_names: Vec<String>,
    pub output_names: Vec<String>,
    pub rows: usize,
    /// Power flows that failed to converge and were redrawn.
    pub resampled: usize,
    /// Hash of the run configuration that produced the file, when known.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub layout: FeatureLayout,
    pub states: StateLayout,
    pub x: Mat,
    /// True states for state estimation, one-hot classes for topology.
    pub y: Mat,
    /// Topology index of every row.
    pub topology: Vec<usize>,
}

struct Row {
    x: Vec<f64>,
    state: Vec<f64>,
    resampled: usize,
}

const MAX_REDRAWS: u64 = 100;

pub fn build_dataset(model: &FeederModel, pdfs: &BTreeMap<String, LoadPdf>, plan: &PlacementPlan, spec: &DatasetSpec) -> Result<Dataset> {
    if spec.topologies.is_empty() || spec.rows_per_topology == 0 {
        return Err(Error::Invalid("dataset needs at least one topology and one row".into()));
    }
    if plan.is_empty() {
        return Err(Error::Invalid("placement plan is empty".into()));
    }
    let layout_topos = if spec.layout_topologies.is_empty() { &spec.topologies } else { &spec.layout_topologies };
    let layout = FeatureLayout::new(model, plan, layout_topos, spec.include_voltages())?;
    let states = StateLayout::new(model)?;
    let n = spec.rows_per_topology;
    let mut rows: Vec<Row> = Vec::with_capacity(n * spec.topologies.len());
    for (t, config) in spec.topologies.iter().enumerate() {
        let solver = PowerFlowSolver::new(model, config, PowerFlowOptions::default())?;
        let make = |i: usize| -> Result<Row> {
            let g = (t * n + i) as u64;
            let mut resampled = 0;
            for attempt in 0..MAX_REDRAWS {
                let draw = g + attempt * (1 << 40);
                let scen = sample_scenario(pdfs, model, &spec.sampler, draw)?;
                let sol = solver.solve(&scen.injections)?;
                if !sol.converged {
                    resampled += 1;
                    continue;
                }
                let mut noise = rng::stream(spec.seed, rng::tags::NOISE, draw);
                let x = layout.measure(model, &sol, &spec.error, &mut noise);
                let state = if spec.kind == TaskKind::Dsse { states.state(model, &sol) } else { Vec::new() };
                return Ok(Row { x, state, resampled });
            }
            Err(Error::Diverged(format!("power flow failed {MAX_REDRAWS} times for row {g}")))
        };
        let workers = spec.workers.max(1).min(n);
        if workers == 1 {
            for i in 0..n {
                rows.push(make(i)?);
            }
        } else {
            let chunk = n.div_ceil(workers);
            let parts: Vec<Result<Vec<Row>>> = std::thread::scope(|s| {
                let handles: Vec<_> = (0..workers)
                    .map(|w| {
                        let make = &make;
                        s.spawn(move || (w * chunk..((w + 1) * chunk).min(n)).map(make).collect::<Result<Vec<_>>>())
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
            });
            for p in parts {
                rows.extend(p?);
            }
        }
    }
    let k = spec.topologies.len();
    let total = rows.len();
    let resampled = rows.iter().map(|r| r.resampled).sum();
    let topology: Vec<usize> = (0..total).map(|r| r / n).collect();
    let x = Mat::from_vec(total, layout.width(), rows.iter().flat_map(|r| r.x.iter().copied()).collect())?;
    let (y, output_names) = match spec.kind {
        TaskKind::Dsse => (Mat::from_vec(total, states.width(), rows.into_iter().flat_map(|r| r.state).collect())?, states.names()),
        TaskKind::Ti => {
            let mut y = Mat::zeros(total, k);
            for (r, &t) in topology.iter().enumerate() {
                y.row_mut(r)[t] = 1.0;
            }
            (y, spec.topologies.iter().map(|c| format!("topology.{}", c.bits())).collect())
        }
    };
    let manifest = DatasetManifest {
        kind: spec.kind,
        feeder_fingerprint: model.fingerprint(),
        placement: plan.ids(model),
        spec: spec.clone(),
        label_map: spec.topologies.iter().map(SwitchConfig::bits).collect(),
        feature_names: layout.names(),
        output_names,
        rows: total,
        resampled,
        config_hash: String::new(),
    };
    Ok(Dataset { manifest, layout, states, x, y, topology })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.x.rows
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows == 0
    }

    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            manifest: DatasetManifest { rows: idx.len(), ..self.manifest.clone() },
            layout: self.layout.clone(),
            states: self.states.clone(),
            x: self.x.select_rows(idx),
            y: self.y.select_rows(idx),
            topology: idx.iter().map(|&i| self.topology[i]).collect(),
        }
    }

    /// Delimited text with a header row, plus `<path>.manifest.json`.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = self.manifest.feature_names.clone();
        header.extend(self.manifest.output_names.iter().cloned());
        header.push("topology".into());
        w.write_record(&header)?;
        for r in 0..self.len() {
            let mut rec: Vec<String> = self.x.row(r).iter().chain(self.y.row(r)).map(|v| format!("{v:?}")).collect();
            rec.push(self.topology[r].to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        let mut f = std::fs::File::create(manifest_path(path))?;
        f.write_all(serde_json::to_string_pretty(&self.manifest)?.as_bytes())?;
        Ok(())
    }

    /// Reads a dataset written by [`Dataset::write`]; layouts are rebuilt
    /// from the model and manifest.
    pub fn read(model: &FeederModel, path: &Path) -> Result<Dataset> {
        let manifest: DatasetManifest = serde_json::from_slice(&std::fs::read(manifest_path(path))?)?;
        if manifest.feeder_fingerprint != model.fingerprint() {
            return Err(Error::Fingerprint { checkpoint: manifest.feeder_fingerprint, actual: model.fingerprint() });
        }
        let ids: Vec<&str> = manifest.placement.iter().map(String::as_str).collect();
        let plan = PlacementPlan::from_ids(model, &ids, crate::smd::Purpose::Both)?;
        let spec = &manifest.spec;
        let layout_topos = if spec.layout_topologies.is_empty() { &spec.topologies } else { &spec.layout_topologies };
        let layout = FeatureLayout::new(model, &plan, layout_topos, spec.include_voltages())?;
        let states = StateLayout::new(model)?;
        let (nx, ny) = (manifest.feature_names.len(), manifest.output_names.len());
        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut topology = Vec::new();
        for rec in csv::Reader::from_path(path)?.records() {
            let rec = rec?;
            if rec.len() != nx + ny + 1 {
                return Err(Error::Corrupt(format!("dataset row has {} columns, expected {}", rec.len(), nx + ny + 1)));
            }
            let vals: Vec<f64> = rec.iter().take(nx + ny).map(|s| s.parse::<f64>()).collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Corrupt(e.to_string()))?;
            x.extend_from_slice(&vals[..nx]);
            y.extend_from_slice(&vals[nx..]);
            topology.push(rec[nx + ny].parse::<usize>().map_err(|e| Error::Corrupt(e.to_string()))?);
        }
        let rows = topology.len();
        Ok(Dataset { layout, states, x: Mat::from_vec(rows, nx, x)?, y: Mat::from_vec(rows, ny, y)?, topology, manifest })
    }
}

pub fn manifest_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    s.into()
}
