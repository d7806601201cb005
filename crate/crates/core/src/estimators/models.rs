//! Training and inference wrappers for the state estimator and the
//! topology classifier.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, TaskKind};
use crate::nn::{
    init_he_normal, split_indices, train, Checkpoint, CheckpointMeta, History, LayerSpec, LossKind, Mat, MlpParams, Mode, Scaler,
    ScalerFit, TrainConfig, TrainData,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub hidden_layers: usize,
    pub width: usize,
}

impl NetworkConfig {
    fn specs(&self, output: LayerSpec) -> Vec<LayerSpec> {
        let mut s = vec![LayerSpec::relu(self.width); self.hidden_layers];
        s.push(output);
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub network: NetworkConfig,
    pub train: TrainConfig,
}

impl EstimatorConfig {
    /// 5 x 500 ReLU, linear output, 200 epochs, mean squared error.
    pub fn dsse_default() -> Self {
        Self { network: NetworkConfig { hidden_layers: 5, width: 500 }, train: TrainConfig::new(LossKind::Mse, 200) }
    }

    /// 5 x 800 ReLU, softmax output, 50 epochs, categorical cross-entropy.
    pub fn ti_default() -> Self {
        Self { network: NetworkConfig { hidden_layers: 5, width: 800 }, train: TrainConfig::new(LossKind::CategoricalCrossEntropy, 50) }
    }
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub checkpoint: Checkpoint,
    pub history: History,
    pub train_rows: Vec<usize>,
    pub val_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub seconds: f64,
}

fn fit(ds: &Dataset, cfg: &EstimatorConfig, output: LayerSpec, task: &str) -> Result<Trained> {
    let (tr, va, te) = split_indices(ds.len(), cfg.train.seed);
    fit_on(ds, cfg, output, task, tr, va, te)
}

fn fit_on(ds: &Dataset, cfg: &EstimatorConfig, output: LayerSpec, task: &str, tr: Vec<usize>, va: Vec<usize>, te: Vec<usize>) -> Result<Trained> {
    if ds.is_empty() {
        return Err(Error::Invalid("dataset is empty".into()));
    }
    let start = Instant::now();
    let params = init_he_normal(&cfg.network.specs(output), ds.x.cols, cfg.train.seed)?;
    let (tx, ty, vx, vy) = (ds.x.select_rows(&tr), ds.y.select_rows(&tr), ds.x.select_rows(&va), ds.y.select_rows(&va));
    let (params, history) = train(params, &TrainData { train_x: &tx, train_y: &ty, val_x: &vx, val_y: &vy }, &cfg.train)?;
    let seconds = start.elapsed().as_secs_f64();
    let meta = CheckpointMeta {
        task: task.into(),
        feeder_fingerprint: ds.manifest.feeder_fingerprint.clone(),
        feature_names: ds.manifest.feature_names.clone(),
        output_names: ds.manifest.output_names.clone(),
        label_map: if task == "ti" { ds.manifest.label_map.clone() } else { vec![] },
        notes: serde_json::json!({
            "network": cfg.network,
            "train": cfg.train,
            "placement": ds.manifest.placement,
            "dataset_topologies": ds.manifest.label_map,
            "error_model": ds.manifest.spec.error,
        }),
    };
    Ok(Trained { checkpoint: Checkpoint::new(params, meta), history, train_rows: tr, val_rows: va, test_rows: te, seconds })
}

pub fn train_dsse(ds: &Dataset, cfg: &EstimatorConfig) -> Result<Trained> {
    if ds.manifest.kind != TaskKind::Dsse {
        return Err(Error::Invalid("state estimation needs a dsse dataset".into()));
    }
    fit(ds, cfg, LayerSpec::linear(ds.y.cols), "dsse")
}

fn check_input(ck: &Checkpoint, task: &str, fingerprint: &str, x: &Mat) -> Result<()> {
    if ck.meta.task != task {
        return Err(Error::Invalid(format!("checkpoint is for `{}`, not `{task}`", ck.meta.task)));
    }
    ck.check_fingerprint(fingerprint)?;
    if x.cols != ck.params.input_width {
        return Err(Error::Shape { expected: format!("{} features", ck.params.input_width), got: x.cols.to_string() });
    }
    Ok(())
}

/// States in (pu, degrees), one row per measurement row.
pub fn estimate_states(ck: &Checkpoint, fingerprint: &str, x: &Mat) -> Result<Mat> {
    check_input(ck, "dsse", fingerprint, x)?;
    ck.params.predict(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineTuneConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub dropout_rate: f64,
    pub seed: u64,
}

impl Default for FineTuneConfig {
    fn default() -> Self {
        Self { epochs: 10, lr: 1e-3, batch_size: 32, dropout_rate: 0.0, seed: 0 }
    }
}

/// Refits the output scaler and rewrites the last layer so the network
/// computes the same function in model units.
pub(crate) fn refit_output_scaler(params: &mut MlpParams, y: &Mat) {
    let new = Scaler::fit(y);
    let old = std::mem::replace(&mut params.output_scaler, new.clone());
    let last = params.layers.last_mut().expect("at least one layer");
    for o in 0..last.w.rows {
        let k = old.std[o] / new.std[o];
        last.w.row_mut(o).iter_mut().for_each(|w| *w *= k);
        last.b[o] = (old.std[o] * last.b[o] + old.mean[o] - new.mean[o]) / new.std[o];
    }
}

/// Starts from the given weights, refits the input scaler on the new rows, refits the output
/// scaler, and retrains every layer briefly on 90% of `ds` (10% validation).
pub fn fine_tune(ck: &Checkpoint, ds: &Dataset, cfg: &FineTuneConfig) -> Result<(Checkpoint, History, f64)> {
    check_input(ck, "dsse", &ds.manifest.feeder_fingerprint, &ds.x)?;
    if ds.y.cols != ck.params.output_width() {
        return Err(Error::Shape { expected: format!("{} outputs", ck.params.output_width()), got: ds.y.cols.to_string() });
    }
    let start = Instant::now();
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    use rand::seq::SliceRandom;
    idx.shuffle(&mut crate::rng::stream(cfg.seed, crate::rng::tags::SPLIT, 2));
    let n_val = (ds.len() / 10).max(1).min(ds.len() - 1);
    let (va, tr) = idx.split_at(n_val);
    let (tx, ty, vx, vy) = (ds.x.select_rows(tr), ds.y.select_rows(tr), ds.x.select_rows(va), ds.y.select_rows(va));
    let mut params = ck.params.clone();
    params.input_scaler = Scaler::fit(&tx);
    refit_output_scaler(&mut params, &ty);
    let mut tc = TrainConfig::new(LossKind::Mse, cfg.epochs);
    tc.lr_init = cfg.lr;
    tc.batch_size = cfg.batch_size;
    tc.dropout_rate = cfg.dropout_rate;
    tc.seed = cfg.seed;
    tc.scalers = ScalerFit::Keep;
    let (params, history) = train(params, &TrainData { train_x: &tx, train_y: &ty, val_x: &vx, val_y: &vy }, &tc)?;
    let mut meta = ck.meta.clone();
    meta.notes = serde_json::json!({ "fine_tuned_from": ck.meta.notes, "fine_tune": cfg, "dataset_topologies": ds.manifest.label_map });
    Ok((Checkpoint::new(params, meta), history, start.elapsed().as_secs_f64()))
}

pub fn train_ti(ds: &Dataset, cfg: &EstimatorConfig) -> Result<Trained> {
    if ds.manifest.kind != TaskKind::Ti {
        return Err(Error::Invalid("topology identification needs a ti dataset".into()));
    }
    let (tr, va, te) = split_indices(ds.len(), cfg.train.seed);
    let k = ds.y.cols;
    let mut seen = vec![false; k];
    tr.iter().for_each(|&r| seen[ds.topology[r]] = true);
    if let Some(c) = seen.iter().position(|s| !s) {
        return Err(Error::Invalid(format!("topology class {c} is absent from the training split")));
    }
    fit_on(ds, cfg, LayerSpec::softmax(k), "ti", tr, va, te)
}

/// Posterior over topologies and its argmax (lowest index on ties).
pub fn identify_topology(ck: &Checkpoint, fingerprint: &str, x: &Mat) -> Result<Vec<(usize, Vec<f64>)>> {
    check_input(ck, "ti", fingerprint, x)?;
    let xs = ck.params.input_scaler.transform(x);
    let out = ck.params.forward(&xs, Mode::Inference)?.output;
    Ok((0..out.rows).map(|r| (argmax(out.row(r)), out.row(r).to_vec())).collect())
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
