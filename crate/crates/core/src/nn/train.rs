//! Mini-batch training with Adam, dropout and a plateau learning-rate schedule.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::mat::Mat;
use super::mlp::{adam_step, backward, loss, AdamConfig, AdamState, LossKind, Mode, MlpParams, Scaler};
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateauConfig {
    pub factor: f64,
    pub patience: usize,
    pub min_lr: f64,
    pub threshold: f64,
}

impl Default for PlateauConfig {
    fn default() -> Self {
        Self { factor: 0.5, patience: 5, min_lr: 1e-4, threshold: 1e-6 }
    }
}

/// Halves the rate after `patience` epochs without a `threshold` improvement.
#[derive(Debug, Clone)]
pub struct PlateauScheduler {
    pub cfg: PlateauConfig,
    pub lr: f64,
    best: f64,
    wait: usize,
}

impl PlateauScheduler {
    pub fn new(cfg: PlateauConfig, lr: f64) -> Self {
        Self { cfg, lr: lr.max(cfg.min_lr), best: f64::INFINITY, wait: 0 }
    }

    pub fn step(&mut self, monitored: f64) -> f64 {
        if monitored < self.best - self.cfg.threshold {
            self.best = monitored;
            self.wait = 0;
        } else {
            self.wait += 1;
            if self.wait >= self.cfg.patience {
                self.lr = (self.lr * self.cfg.factor).max(self.cfg.min_lr);
                self.wait = 0;
            }
        }
        self.lr
    }
}

/// Which scalers `train` refits from the training rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScalerFit {
    #[default]
    Both,
    OutputOnly,
    Keep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout_rate: f64,
    pub lr_init: f64,
    pub plateau: PlateauConfig,
    pub adam: AdamConfig,
    pub loss: LossKind,
    pub seed: u64,
    #[serde(default)]
    pub scalers: ScalerFit,
}

impl TrainConfig {
    pub fn new(loss: LossKind, epochs: usize) -> Self {
        Self {
            epochs,
            batch_size: 32,
            dropout_rate: 0.3,
            lr_init: 0.1,
            plateau: PlateauConfig::default(),
            adam: AdamConfig::default(),
            loss,
            seed: 0,
            scalers: ScalerFit::Both,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Invalid("epochs and batch size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) || !(self.lr_init > 0.0 && self.lr_init < 1.0) {
            return Err(Error::Invalid("dropout must be in [0, 1) and lr in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

/// Training and validation rows in model units (before scaling).
pub struct TrainData<'a> {
    pub train_x: &'a Mat,
    pub train_y: &'a Mat,
    pub val_x: &'a Mat,
    pub val_y: &'a Mat,
}

/// Seeded 80/20 split with a tenth of the 80% held for validation:
/// returns (train, validation, test) row indices.
pub fn split_indices(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed, rng::tags::SPLIT, 1));
    let n_test = (n as f64 * 0.2).round() as usize;
    let n_val = ((n - n_test) as f64 * 0.1).round() as usize;
    let test = idx[..n_test].to_vec();
    let val = idx[n_test..n_test + n_val].to_vec();
    let train = idx[n_test + n_val..].to_vec();
    (train, val, test)
}

fn scaled_loss(params: &MlpParams, x: &Mat, y: &Mat, kind: LossKind) -> Result<f64> {
    if x.rows == 0 {
        return Ok(f64::NAN);
    }
    let out = params.forward(x, Mode::Inference)?.output;
    loss(&out, y, kind)
}

/// Returns the parameters with the lowest validation loss (training loss
/// when no validation rows are given).
pub fn train(mut params: MlpParams, data: &TrainData<'_>, cfg: &TrainConfig) -> Result<(MlpParams, History)> {
    cfg.validate()?;
    if data.train_x.rows == 0 || data.train_x.rows != data.train_y.rows || data.val_x.rows != data.val_y.rows {
        return Err(Error::Invalid("training set is empty or misaligned".into()));
    }
    match cfg.scalers {
        ScalerFit::Both => {
            params.input_scaler = Scaler::fit(data.train_x);
            params.output_scaler = output_scaler(data.train_y, cfg.loss);
        }
        ScalerFit::OutputOnly => params.output_scaler = output_scaler(data.train_y, cfg.loss),
        ScalerFit::Keep => {}
    }
    let tx = params.input_scaler.transform(data.train_x);
    let ty = params.output_scaler.transform(data.train_y);
    let vx = params.input_scaler.transform(data.val_x);
    let vy = params.output_scaler.transform(data.val_y);

    let mut adam = AdamState::new(&params, cfg.adam);
    let mut sched = PlateauScheduler::new(cfg.plateau, cfg.lr_init);
    let mut history = History { best_val_loss: f64::INFINITY, ..Default::default() };
    let mut best = params.clone();
    let mut order: Vec<usize> = (0..tx.rows).collect();
    let mut drop_rng = rng::stream(cfg.seed, rng::tags::DROPOUT, 0);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng::stream(cfg.seed, rng::tags::SHUFFLE, epoch as u64));
        let lr = sched.lr;
        let mut total = 0.0;
        for (bi, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let bx = tx.select_rows(chunk);
            let by = ty.select_rows(chunk);
            let cache = params.forward(&bx, Mode::Train { dropout: cfg.dropout_rate, rng: &mut drop_rng })?;
            let l = loss(&cache.output, &by, cfg.loss)?;
            if !l.is_finite() {
                return Err(Error::Diverged(format!("non-finite loss at epoch {epoch}, batch {bi}, lr {lr}")));
            }
            total += l * chunk.len() as f64;
            let g = backward(&params, &cache, &by, cfg.loss)?;
            adam_step(&mut params, &g, &mut adam, lr);
        }
        let train_loss = total / tx.rows as f64;
        let val_loss = if vx.rows > 0 { scaled_loss(&params, &vx, &vy, cfg.loss)? } else { train_loss };
        if !val_loss.is_finite() {
            return Err(Error::Diverged(format!("non-finite validation loss at epoch {epoch}, lr {lr}")));
        }
        history.epochs.push(EpochRecord { epoch, train_loss, val_loss, lr });
        if val_loss < history.best_val_loss {
            history.best_val_loss = val_loss;
            history.best_epoch = epoch;
            best = params.clone();
        }
        sched.step(val_loss);
    }
    Ok((best, history))
}

fn output_scaler(y: &Mat, kind: LossKind) -> Scaler {
    match kind {
        LossKind::Mse => Scaler::fit(y),
        LossKind::CategoricalCrossEntropy => Scaler::identity(y.cols),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_he_normal, LayerSpec};
    use crate::rng::seeded;
    use rand::Rng as _;

    fn line_data(n: usize, seed: u64) -> (Mat, Mat) {
        let mut r = seeded(seed);
        let x: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let y = x.iter().map(|v| 2.0 * v).collect();
        (Mat { rows: n, cols: 1, data: x }, Mat { rows: n, cols: 1, data: y })
    }

    #[test]
    fn learns_a_line() {
        let (x, y) = line_data(200, 1);
        let (vx, vy) = line_data(40, 2);
        let p = init_he_normal(&[LayerSpec::linear(1)], 1, 0).unwrap();
        let mut cfg = TrainConfig::new(LossKind::Mse, 60);
        cfg.dropout_rate = 0.0;
        cfg.lr_init = 0.05;
        let data = TrainData { train_x: &x, train_y: &y, val_x: &vx, val_y: &vy };
        let (p, h) = train(p, &data, &cfg).unwrap();
        let pred = p.predict(&vx).unwrap();
        assert!(loss(&pred, &vy, LossKind::Mse).unwrap() < 1e-4);
        assert!(h.best_val_loss <= h.epochs[0].val_loss);
        for w in h.epochs.windows(2) {
            assert!(w[1].lr <= w[0].lr && w[1].lr >= cfg.plateau.min_lr);
        }
    }

    #[test]
    fn scheduler_contract() {
        let mut s = PlateauScheduler::new(PlateauConfig::default(), 0.1);
        let mut last = 0.1;
        for k in 0..100 {
            let lr = s.step(if k < 3 { 1.0 / (k + 1) as f64 } else { 1.0 });
            assert!(lr <= last && lr >= 1e-4);
            last = lr;
        }
        assert_eq!(last, 1e-4);
    }

    #[test]
    fn split_proportions() {
        let (tr, va, te) = split_indices(1000, 3);
        assert_eq!((tr.len(), va.len(), te.len()), (720, 80, 200));
        let mut all: Vec<_> = tr.iter().chain(&va).chain(&te).copied().collect();
        all.sort();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
    }

    #[test]
    fn toy_loss_trends_down() {
        let mut r = seeded(4);
        let n = 300;
        let x = Mat { rows: n, cols: 2, data: (0..2 * n).map(|_| r.random_range(-1.0..1.0)).collect() };
        let y = Mat { rows: n, cols: 1, data: (0..n).map(|i| x.get(i, 0) * x.get(i, 0) + x.get(i, 1)).collect() };
        let p = init_he_normal(&[LayerSpec::relu(16), LayerSpec::relu(16), LayerSpec::linear(1)], 2, 1).unwrap();
        let mut cfg = TrainConfig::new(LossKind::Mse, 40);
        cfg.lr_init = 0.01;
        cfg.dropout_rate = 0.0;
        let data = TrainData { train_x: &x, train_y: &y, val_x: &x, val_y: &y };
        let (_, h) = train(p, &data, &cfg).unwrap();
        let smooth: Vec<f64> = h.epochs.chunks(5).map(|c| c.iter().map(|e| e.train_loss).sum::<f64>() / c.len() as f64).collect();
        for w in smooth.windows(2) {
            assert!(w[1] <= w[0] * 1.3, "{smooth:?}");
        }
    }

    #[test]
    fn empty_dataset_errors() {
        let p = init_he_normal(&[LayerSpec::linear(1)], 1, 0).unwrap();
        let e = Mat::zeros(0, 1);
        let data = TrainData { train_x: &e, train_y: &e, val_x: &e, val_y: &e };
        assert!(train(p, &data, &TrainConfig::new(LossKind::Mse, 1)).is_err());
    }
}
