//! Dense feed-forward network: forward pass, losses and backpropagation.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::mat::{gemm, Mat};
use crate::rng::{self, Rng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Linear,
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub width: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn relu(width: usize) -> Self {
        Self { width, activation: Activation::Relu }
    }
    pub fn linear(width: usize) -> Self {
        Self { width, activation: Activation::Linear }
    }
    pub fn softmax(width: usize) -> Self {
        Self { width, activation: Activation::Softmax }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    CategoricalCrossEntropy,
}

/// Per-feature z-score transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub const STD_FLOOR: f64 = 1e-8;

impl Scaler {
    pub fn fit(x: &Mat) -> Self {
        let n = x.rows.max(1) as f64;
        let mut mean = vec![0.0; x.cols];
        for r in 0..x.rows {
            for (m, v) in mean.iter_mut().zip(x.row(r)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; x.cols];
        for r in 0..x.rows {
            for ((s, v), m) in var.iter_mut().zip(x.row(r)).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        let std = var.into_iter().map(|s| (s / n).sqrt().max(STD_FLOOR)).collect();
        Self { mean, std }
    }

    pub fn identity(width: usize) -> Self {
        Self { mean: vec![0.0; width], std: vec![1.0; width] }
    }

    pub fn transform(&self, x: &Mat) -> Mat {
        let mut out = x.clone();
        for r in 0..out.rows {
            for ((v, m), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        out
    }

    pub fn inverse(&self, x: &Mat) -> Mat {
        let mut out = x.clone();
        for r in 0..out.rows {
            for ((v, m), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = *v * s + m;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub spec: LayerSpec,
    /// out x in
    pub w: Mat,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub input_width: usize,
    pub layers: Vec<Layer>,
    pub input_scaler: Scaler,
    pub output_scaler: Scaler,
}

fn check_specs(specs: &[LayerSpec], input_width: usize) -> Result<()> {
    if specs.is_empty() || input_width == 0 || specs.iter().any(|s| s.width == 0) {
        return Err(Error::Invalid("network needs at least one layer and positive widths".into()));
    }
    if specs[..specs.len() - 1].iter().any(|s| s.activation == Activation::Softmax) {
        return Err(Error::Invalid("softmax is only allowed on the output layer".into()));
    }
    Ok(())
}

/// Weights ~ N(0, 2 / fan_in), biases zero.
pub fn init_he_normal(specs: &[LayerSpec], input_width: usize, seed: u64) -> Result<MlpParams> {
    check_specs(specs, input_width)?;
    let mut r = rng::stream(seed, rng::tags::INIT, 0);
    let mut layers = Vec::with_capacity(specs.len());
    let mut fan_in = input_width;
    for s in specs {
        let n = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
        let data = (0..s.width * fan_in).map(|_| n.sample(&mut r)).collect();
        layers.push(Layer { spec: *s, w: Mat { rows: s.width, cols: fan_in, data }, b: vec![0.0; s.width] });
        fan_in = s.width;
    }
    Ok(MlpParams {
        input_width,
        layers,
        input_scaler: Scaler::identity(input_width),
        output_scaler: Scaler::identity(fan_in),
    })
}

/// Activations kept for the backward pass. `inputs[l]` feeds layer `l`
/// (after its dropout mask), `masks[l]` is the mask applied to the output
/// of hidden layer `l`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub inputs: Vec<Mat>,
    pub pre: Vec<Mat>,
    pub masks: Vec<Option<Mat>>,
    pub output: Mat,
}

pub enum Mode<'a> {
    Inference,
    Train { dropout: f64, rng: &'a mut Rng },
}

fn activate(act: Activation, z: &Mat) -> Mat {
    let mut a = z.clone();
    match act {
        Activation::Linear => {}
        Activation::Relu => a.data.iter_mut().for_each(|v| *v = v.max(0.0)),
        Activation::Softmax => {
            for r in 0..a.rows {
                let row = a.row_mut(r);
                let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut s = 0.0;
                for v in row.iter_mut() {
                    *v = (*v - m).exp();
                    s += *v;
                }
                row.iter_mut().for_each(|v| *v /= s);
            }
        }
    }
    a
}

impl MlpParams {
    pub fn output_width(&self) -> usize {
        self.layers.last().map_or(0, |l| l.spec.width)
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.w.data.len() + l.b.len()).sum()
    }

    /// Forward pass on already-scaled inputs.
    pub fn forward(&self, x: &Mat, mode: Mode<'_>) -> Result<ForwardCache> {
        if x.cols != self.input_width {
            return Err(Error::Shape { expected: format!("{} input features", self.input_width), got: format!("{}", x.cols) });
        }
        let (p, mut rng) = match mode {
            Mode::Inference => (0.0, None),
            Mode::Train { dropout, rng } => (dropout, Some(rng)),
        };
        let nl = self.layers.len();
        let mut inputs = Vec::with_capacity(nl);
        let mut pre = Vec::with_capacity(nl);
        let mut masks = Vec::with_capacity(nl);
        let mut a = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = Mat::zeros(a.rows, layer.spec.width);
            for r in 0..z.rows {
                z.row_mut(r).copy_from_slice(&layer.b);
            }
            gemm(1.0, &a, false, &layer.w, true, 1.0, &mut z);
            let mut out = activate(layer.spec.activation, &z);
            let mut mask = None;
            if l + 1 < nl && p > 0.0 {
                if let Some(r) = rng.as_deref_mut() {
                    let keep = 1.0 / (1.0 - p);
                    let m = Mat {
                        rows: out.rows,
                        cols: out.cols,
                        data: (0..out.data.len()).map(|_| if r.random::<f64>() < p { 0.0 } else { keep }).collect(),
                    };
                    out.data.iter_mut().zip(&m.data).for_each(|(v, k)| *v *= k);
                    mask = Some(m);
                }
            }
            inputs.push(a);
            pre.push(z);
            masks.push(mask);
            a = out;
        }
        Ok(ForwardCache { inputs, pre, masks, output: a })
    }

    /// Inference in model units: scaled in, unscaled out.
    pub fn predict(&self, x: &Mat) -> Result<Mat> {
        let xs = self.input_scaler.transform(x);
        let out = self.forward(&xs, Mode::Inference)?.output;
        Ok(self.output_scaler.inverse(&out))
    }

    pub fn predict_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.predict(&Mat::from_vec(1, x.len(), x.to_vec())?)?.data)
    }
}

pub fn loss(output: &Mat, target: &Mat, kind: LossKind) -> Result<f64> {
    if (output.rows, output.cols) != (target.rows, target.cols) {
        return Err(Error::Shape {
            expected: format!("{}x{}", output.rows, output.cols),
            got: format!("{}x{}", target.rows, target.cols),
        });
    }
    if output.data.is_empty() {
        return Ok(0.0);
    }
    Ok(match kind {
        LossKind::Mse => output.data.iter().zip(&target.data).map(|(o, t)| (o - t).powi(2)).sum::<f64>() / output.data.len() as f64,
        LossKind::CategoricalCrossEntropy => {
            -output.data.iter().zip(&target.data).map(|(o, t)| t * o.max(1e-12).ln()).sum::<f64>() / output.rows as f64
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub w: Vec<Mat>,
    pub b: Vec<Vec<f64>>,
}

impl Grads {
    pub fn max_abs(&self) -> f64 {
        self.w.iter().flat_map(|m| &m.data).chain(self.b.iter().flatten()).fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// Exact gradient of the mean batch loss with the cached dropout masks.
pub fn backward(params: &MlpParams, cache: &ForwardCache, target: &Mat, kind: LossKind) -> Result<Grads> {
    let out = &cache.output;
    if (out.rows, out.cols) != (target.rows, target.cols) {
        return Err(Error::Shape { expected: format!("{}x{}", out.rows, out.cols), got: format!("{}x{}", target.rows, target.cols) });
    }
    let nl = params.layers.len();
    let last = params.layers[nl - 1].spec.activation;
    let batch = out.rows as f64;
    // dL/dz at the output layer
    let mut dz = Mat::zeros(out.rows, out.cols);
    match (kind, last) {
        (LossKind::CategoricalCrossEntropy, Activation::Softmax) => {
            for (d, (o, t)) in dz.data.iter_mut().zip(out.data.iter().zip(&target.data)) {
                *d = (o - t) / batch;
            }
        }
        (LossKind::CategoricalCrossEntropy, _) => {
            return Err(Error::Invalid("cross-entropy needs a softmax output layer".into()));
        }
        (LossKind::Mse, act) => {
            let scale = 2.0 / out.data.len() as f64;
            let g: Vec<f64> = out.data.iter().zip(&target.data).map(|(o, t)| scale * (o - t)).collect();
            match act {
                Activation::Linear => dz.data = g,
                Activation::Relu => {
                    for ((d, gv), z) in dz.data.iter_mut().zip(&g).zip(&cache.pre[nl - 1].data) {
                        *d = if *z > 0.0 { *gv } else { 0.0 };
                    }
                }
                Activation::Softmax => {
                    for r in 0..out.rows {
                        let y = out.row(r);
                        let gr = &g[r * out.cols..(r + 1) * out.cols];
                        let dot: f64 = y.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for (c, d) in dz.row_mut(r).iter_mut().enumerate() {
                            *d = y[c] * (gr[c] - dot);
                        }
                    }
                }
            }
        }
    }
    let mut gw = vec![Mat::zeros(0, 0); nl];
    let mut gb = vec![Vec::new(); nl];
    for l in (0..nl).rev() {
        let layer = &params.layers[l];
        let mut w = Mat::zeros(layer.w.rows, layer.w.cols);
        gemm(1.0, &dz, true, &cache.inputs[l], false, 0.0, &mut w);
        let mut b = vec![0.0; layer.b.len()];
        for r in 0..dz.rows {
            for (s, v) in b.iter_mut().zip(dz.row(r)) {
                *s += v;
            }
        }
        gw[l] = w;
        gb[l] = b;
        if l > 0 {
            let mut da = Mat::zeros(dz.rows, layer.w.cols);
            gemm(1.0, &dz, false, &layer.w, false, 0.0, &mut da);
            if let Some(m) = &cache.masks[l - 1] {
                da.data.iter_mut().zip(&m.data).for_each(|(v, k)| *v *= k);
            }
            // hidden layers are never softmax
            if params.layers[l - 1].spec.activation == Activation::Relu {
                da.data.iter_mut().zip(&cache.pre[l - 1].data).for_each(|(v, z)| {
                    if *z <= 0.0 {
                        *v = 0.0
                    }
                });
            }
            dz = da;
        }
    }
    Ok(Grads { w: gw, b: gb })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub cfg: AdamConfig,
    pub t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &MlpParams, cfg: AdamConfig) -> Self {
        let sizes: Vec<usize> = params.layers.iter().flat_map(|l| [l.w.data.len(), l.b.len()]).collect();
        Self { cfg, t: 0, m: sizes.iter().map(|n| vec![0.0; *n]).collect(), v: sizes.iter().map(|n| vec![0.0; *n]).collect() }
    }
}

fn adam_update(p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], lr_t: f64, c: &AdamConfig, bc2: f64) {
    for i in 0..p.len() {
        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
        p[i] -= lr_t * m[i] / ((v[i] / bc2).sqrt() + c.eps);
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(params: &mut MlpParams, grads: &Grads, state: &mut AdamState, lr: f64) {
    state.t += 1;
    let c = state.cfg;
    let bc1 = 1.0 - c.beta1.powi(state.t as i32);
    let bc2 = 1.0 - c.beta2.powi(state.t as i32);
    let lr_t = lr / bc1;
    for (l, layer) in params.layers.iter_mut().enumerate() {
        let (mw, rest) = state.m[2 * l..].split_at_mut(1);
        let (vw, vrest) = state.v[2 * l..].split_at_mut(1);
        adam_update(&mut layer.w.data, &grads.w[l].data, &mut mw[0], &mut vw[0], lr_t, &c, bc2);
        adam_update(&mut layer.b, &grads.b[l], &mut rest[0], &mut vrest[0], lr_t, &c, bc2);
    }
}
