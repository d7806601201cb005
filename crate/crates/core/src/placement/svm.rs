//! Linear one-vs-rest max-margin classifier trained by Pegasos-style
//! stochastic subgradient steps on the regularized hinge loss.

use rand::seq::SliceRandom;

use crate::nn::{Mat, Scaler};
use crate::rng;

#[derive(Debug, Clone, Copy)]
pub struct SvmConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self { lambda: 1e-4, epochs: 30, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct LinearOvr {
    pub scaler: Scaler,
    /// classes x (features + 1), bias last
    pub w: Vec<Vec<f64>>,
}

impl LinearOvr {
    pub fn fit(x: &Mat, y: &[usize], classes: usize, cfg: &SvmConfig) -> Self {
        let scaler = Scaler::fit(x);
        let xs = scaler.transform(x);
        let d = x.cols + 1;
        let mut w = vec![vec![0.0; d]; classes];
        let mut order: Vec<usize> = (0..x.rows).collect();
        for (c, wc) in w.iter_mut().enumerate() {
            let mut t = 0usize;
            for e in 0..cfg.epochs {
                order.shuffle(&mut rng::stream(cfg.seed, rng::tags::SVM, (c * 10_000 + e) as u64));
                for &i in &order {
                    t += 1;
                    let eta = 1.0 / (cfg.lambda * (t as f64 + 1e3));
                    let xi = xs.row(i);
                    let yi = if y[i] == c { 1.0 } else { -1.0 };
                    let margin = yi * (xi.iter().zip(wc.iter()).map(|(a, b)| a * b).sum::<f64>() + wc[d - 1]);
                    let shrink = 1.0 - eta * cfg.lambda;
                    wc[..d - 1].iter_mut().for_each(|v| *v *= shrink);
                    if margin < 1.0 {
                        for (v, a) in wc.iter_mut().zip(xi) {
                            *v += eta * yi * a;
                        }
                        wc[d - 1] += eta * yi;
                    }
                }
            }
        }
        Self { scaler, w }
    }

    pub fn predict(&self, x: &Mat) -> Vec<usize> {
        let xs = self.scaler.transform(x);
        (0..xs.rows)
            .map(|r| {
                let xi = xs.row(r);
                let score = |wc: &Vec<f64>| xi.iter().zip(wc).map(|(a, b)| a * b).sum::<f64>() + wc[wc.len() - 1];
                let mut best = 0;
                let mut best_s = f64::NEG_INFINITY;
                for (c, wc) in self.w.iter().enumerate() {
                    let s = score(wc);
                    if s > best_s {
                        best_s = s;
                        best = c;
                    }
                }
                best
            })
            .collect()
    }

    pub fn accuracy(&self, x: &Mat, y: &[usize]) -> f64 {
        if y.is_empty() {
            return 0.0;
        }
        let p = self.predict(x);
        100.0 * p.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
    }
}
