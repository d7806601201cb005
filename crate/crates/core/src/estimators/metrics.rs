//! Accuracy measures for state and topology estimates.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::nn::Mat;
use crate::phasor::wrap_deg;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceBound {
    pub proportion: f64,
    pub confidence: f64,
    pub bound: f64,
    /// 1-based order statistic used.
    pub order: usize,
    pub n: usize,
}

/// Smallest sample size for which the maximum is a valid bound.
pub fn min_tolerance_samples(p: f64, gamma: f64) -> usize {
    let mut n = 1;
    while p.powi(n as i32) > 1.0 - gamma {
        n += 1;
    }
    n
}

/// Distribution-free one-sided upper tolerance bound: the r-th order
/// statistic, r the smallest integer with BinomCDF(r - 1; N, p) >= gamma.
pub fn tolerance_upper_bound(errors: &[f64], p: f64, gamma: f64) -> Result<ToleranceBound> {
    if !(p > 0.0 && p < 1.0 && gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Invalid("proportion and confidence must lie in (0, 1)".into()));
    }
    let n = errors.len();
    let need = min_tolerance_samples(p, gamma);
    if n < need {
        return Err(Error::InsufficientSamples { needed: need, got: n });
    }
    let binom = Binomial::new(p, n as u64).map_err(|e| Error::Invalid(e.to_string()))?;
    let r = (1..=n).find(|&r| binom.cdf((r - 1) as u64) >= gamma).unwrap_or(n);
    let mut s = errors.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(ToleranceBound { proportion: p, confidence: gamma, bound: s[r - 1], order: r, n })
}

/// Absolute wrapped angle errors (degrees) for every row and node.
pub fn angle_errors(est: &Mat, truth: &Mat) -> Result<Vec<f64>> {
    check(est, truth)?;
    Ok((0..est.rows)
        .flat_map(|r| (1..est.cols).step_by(2).map(move |c| (r, c)))
        .map(|(r, c)| wrap_deg(est.get(r, c) - truth.get(r, c)).abs())
        .collect())
}

fn check(est: &Mat, truth: &Mat) -> Result<()> {
    if (est.rows, est.cols) != (truth.rows, truth.cols) || est.cols % 2 != 0 {
        return Err(Error::Shape { expected: format!("{}x{} (mag, ang pairs)", truth.rows, truth.cols), got: format!("{}x{}", est.rows, est.cols) });
    }
    Ok(())
}

/// Mean absolute angle error in degrees, wrap-aware.
pub fn mae_phase(est: &Mat, truth: &Mat) -> Result<f64> {
    let e = angle_errors(est, truth)?;
    Ok(if e.is_empty() { 0.0 } else { e.iter().sum::<f64>() / e.len() as f64 })
}

/// Mean absolute percentage magnitude error; entries with zero true
/// magnitude are skipped and counted.
pub fn mape_magnitude(est: &Mat, truth: &Mat) -> Result<(f64, usize)> {
    check(est, truth)?;
    let (mut sum, mut n, mut skipped) = (0.0, 0usize, 0usize);
    for r in 0..est.rows {
        for c in (0..est.cols).step_by(2) {
            let t = truth.get(r, c);
            if t == 0.0 {
                skipped += 1;
                continue;
            }
            sum += ((est.get(r, c) - t) / t).abs();
            n += 1;
        }
    }
    Ok((if n == 0 { 0.0 } else { 100.0 * sum / n as f64 }, skipped))
}

/// Per node-phase angle MAE.
pub fn mae_per_node(est: &Mat, truth: &Mat) -> Result<Vec<f64>> {
    check(est, truth)?;
    let nodes = est.cols / 2;
    let mut acc = vec![0.0; nodes];
    for r in 0..est.rows {
        for (k, a) in acc.iter_mut().enumerate() {
            *a += wrap_deg(est.get(r, 2 * k + 1) - truth.get(r, 2 * k + 1)).abs();
        }
    }
    let n = est.rows.max(1) as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct StateMetrics {
    pub angle_mae_deg: f64,
    pub magnitude_mape_pct: f64,
    pub angle_tolerance_deg: Option<ToleranceBound>,
    pub per_node_mae_deg: Vec<(String, f64)>,
    pub excluded_zero_magnitude: usize,
    pub rows: usize,
}

pub fn state_metrics(est: &Mat, truth: &Mat, node_labels: &[String]) -> Result<StateMetrics> {
    let errs = angle_errors(est, truth)?;
    let (mape, skipped) = mape_magnitude(est, truth)?;
    let per = mae_per_node(est, truth)?;
    Ok(StateMetrics {
        angle_mae_deg: if errs.is_empty() { 0.0 } else { errs.iter().sum::<f64>() / errs.len() as f64 },
        magnitude_mape_pct: mape,
        angle_tolerance_deg: tolerance_upper_bound(&errs, 0.95, 0.95).ok(),
        per_node_mae_deg: node_labels.iter().cloned().zip(per).collect(),
        excluded_zero_magnitude: skipped,
        rows: est.rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ClassMetrics {
    pub accuracy_pct: f64,
    pub per_class_accuracy_pct: Vec<f64>,
    /// `confusion[true][predicted]`
    pub confusion: Vec<Vec<usize>>,
    pub labels: Vec<String>,
}

pub fn class_metrics(predicted: &[usize], truth: &[usize], labels: &[String]) -> ClassMetrics {
    let k = labels.len();
    let mut confusion = vec![vec![0; k]; k];
    for (&p, &t) in predicted.iter().zip(truth) {
        confusion[t][p] += 1;
    }
    let correct: usize = (0..k).map(|i| confusion[i][i]).sum();
    let per = (0..k)
        .map(|i| {
            let tot: usize = confusion[i].iter().sum();
            if tot == 0 { f64::NAN } else { 100.0 * confusion[i][i] as f64 / tot as f64 }
        })
        .collect();
    ClassMetrics {
        accuracy_pct: if truth.is_empty() { 0.0 } else { 100.0 * correct as f64 / truth.len() as f64 },
        per_class_accuracy_pct: per,
        confusion,
        labels: labels.to_vec(),
    }
}

/// Combined report for state estimation and topology identification runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MetricsReport {
    pub title: String,
    pub smd_count: usize,
    pub state: Option<StateMetrics>,
    pub topology: Option<ClassMetrics>,
    pub timings_s: Vec<(String, f64)>,
}

impl MetricsReport {
    pub fn table(&self) -> String {
        let mut s = format!("{}\n", self.title);
        s.push_str(&format!("  SMDs                      {}\n", self.smd_count));
        if let Some(m) = &self.state {
            s.push_str(&format!("  rows                      {}\n", m.rows));
            s.push_str(&format!("  angle MAE [deg]           {:.4}\n", m.angle_mae_deg));
            match &m.angle_tolerance_deg {
                Some(t) => s.push_str(&format!("  95/95 angle bound [deg]   {:.4}\n", t.bound)),
                None => s.push_str("  95/95 angle bound [deg]   n/a\n"),
            }
            s.push_str(&format!("  magnitude MAPE [%]        {:.4}\n", m.magnitude_mape_pct));
        }
        if let Some(c) = &self.topology {
            s.push_str(&format!("  TI accuracy [%]           {:.2}\n", c.accuracy_pct));
            for (l, a) in c.labels.iter().zip(&c.per_class_accuracy_pct) {
                s.push_str(&format!("    {l:<10} {a:.2}\n"));
            }
        }
        for (k, t) in &self.timings_s {
            s.push_str(&format!("  {k:<25} {t:.2} s\n"));
        }
        s
    }
}
