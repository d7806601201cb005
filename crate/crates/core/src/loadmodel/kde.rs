//! Gaussian kernel density estimates of transformer-level demand.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::ks::ks_two_sample;
use crate::rng::{self, Rng};
use crate::{Error, Result};

pub const MIN_SAMPLES: usize = 30;
/// Bandwidth floor in kW, also used for point-mass data.
pub const BANDWIDTH_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LoadPdf {
    pub group: String,
    pub sample_points: Vec<f64>,
    pub bandwidth: f64,
    /// Multiplier applied on top of Silverman's bandwidth.
    pub scale: f64,
    pub point_mass: bool,
    /// False when no candidate scale met the acceptance rule.
    pub accepted: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct KdeFitOptions {
    pub target_coverage: f64,
    pub alpha: f64,
    pub holdout_fraction: f64,
    pub seed: u64,
    pub max_scale: f64,
    pub scale_step: f64,
}

impl Default for KdeFitOptions {
    fn default() -> Self {
        Self { target_coverage: 0.95, alpha: 0.05, holdout_fraction: 0.1, seed: 0, max_scale: 8.0, scale_step: 1.02 }
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Upper-tail standard normal quantile by bisection.
fn z_upper(alpha: f64) -> f64 {
    let (mut a, mut b) = (0.0, 40.0);
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        if 1.0 - std_normal_cdf(m) > alpha { a = m } else { b = m }
    }
    0.5 * (a + b)
}

pub fn silverman_bandwidth(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

impl LoadPdf {
    pub fn new(group: impl Into<String>, sample_points: Vec<f64>, bandwidth: f64) -> Result<Self> {
        if sample_points.is_empty() || !(bandwidth > 0.0) {
            return Err(Error::Invalid("KDE needs samples and a positive bandwidth".into()));
        }
        Ok(Self { group: group.into(), sample_points, bandwidth, scale: 1.0, point_mass: false, accepted: true })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * h * self.sample_points.len() as f64);
        self.sample_points.iter().map(|c| (-0.5 * ((x - c) / h).powi(2)).exp()).sum::<f64>() * norm
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        self.sample_points.iter().map(|c| std_normal_cdf((x - c) / h)).sum::<f64>() / self.sample_points.len() as f64
    }

    pub fn mean(&self) -> f64 {
        self.sample_points.iter().sum::<f64>() / self.sample_points.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let n = self.sample_points.len() as f64;
        self.sample_points.iter().map(|c| (c - m).powi(2)).sum::<f64>() / n + self.bandwidth.powi(2)
    }

    pub fn support(&self) -> (f64, f64) {
        let lo = self.sample_points.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.sample_points.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Inverse CDF by bisection on the mixture CDF.
    pub fn quantile(&self, p: f64) -> f64 {
        let (lo, hi) = self.support();
        let (mut a, mut b) = (lo - 10.0 * self.bandwidth, hi + 10.0 * self.bandwidth);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if self.cdf(mid) < p {
                a = mid;
            } else {
                b = mid;
            }
            if b - a <= 1e-12 * (1.0 + mid.abs()) {
                break;
            }
        }
        0.5 * (a + b)
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        let c = self.sample_points[rng.random_range(0..self.sample_points.len())];
        let z: f64 = StandardNormal.sample(rng);
        let z = if self.point_mass { z.clamp(-4.0, 4.0) } else { z };
        c + self.bandwidth * z
    }

    pub fn sample_n(&self, n: usize, rng: &mut Rng) -> Vec<f64> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

/// Silverman start on a fitting split, widened until the held-out split
/// passes the KS test and its share inside the central interval is not
/// significantly below the target (one-sided binomial test at `alpha`).
pub fn fit_kde(group: &str, samples: &[f64], opts: &KdeFitOptions) -> Result<LoadPdf> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::InsufficientSamples { needed: MIN_SAMPLES, got: samples.len() });
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid(format!("group {group}: non-finite sample")));
    }
    let first = samples[0];
    if samples.iter().all(|v| *v == first) {
        return Ok(LoadPdf {
            group: group.into(),
            sample_points: vec![first],
            bandwidth: BANDWIDTH_FLOOR,
            scale: 1.0,
            point_mass: true,
            accepted: true,
        });
    }
    let mut shuffled = samples.to_vec();
    shuffled.shuffle(&mut rng::stream(opts.seed, rng::tags::SPLIT, 0));
    let n_hold = ((samples.len() as f64 * opts.holdout_fraction).round() as usize).max(1);
    let (held, fit) = shuffled.split_at(n_hold);
    let h0 = silverman_bandwidth(fit).max(BANDWIDTH_FLOOR);
    let mut pdf = LoadPdf::new(group, fit.to_vec(), h0)?;
    let draws = (4 * held.len()).max(1000);
    let lo_q = (1.0 - opts.target_coverage) / 2.0;
    let t = opts.target_coverage;
    let coverage_floor = t - z_upper(opts.alpha) * (t * (1.0 - t) / held.len() as f64).sqrt();
    let mut scale = 1.0;
    loop {
        pdf.bandwidth = h0 * scale;
        pdf.scale = scale;
        let synth = pdf.sample_n(draws, &mut rng::stream(opts.seed, rng::tags::KDE, 0));
        let ks = ks_two_sample(held, &synth, opts.alpha)?;
        let (a, b) = (pdf.quantile(lo_q), pdf.quantile(1.0 - lo_q));
        let inside = held.iter().filter(|v| **v >= a && **v <= b).count() as f64 / held.len() as f64;
        if !ks.reject && inside >= coverage_floor {
            pdf.accepted = true;
            return Ok(pdf);
        }
        if scale * opts.scale_step > opts.max_scale {
            pdf.accepted = false;
            return Ok(pdf);
        }
        scale *= opts.scale_step;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut r = seeded(seed);
        (0..n).map(|_| StandardNormal.sample(&mut r)).collect()
    }

    #[test]
    fn density_integrates_to_one() {
        let pdf = fit_kde("g", &normals(200, 1), &KdeFitOptions::default()).unwrap();
        let (lo, hi) = pdf.support();
        let (a, b) = (lo - 10.0 * pdf.bandwidth, hi + 10.0 * pdf.bandwidth);
        let n = 20000;
        let dx = (b - a) / n as f64;
        // Simpson's rule
        let mut s = pdf.pdf(a) + pdf.pdf(b);
        for i in 1..n {
            s += pdf.pdf(a + i as f64 * dx) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        assert!((s * dx / 3.0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn standard_normal_moments() {
        let pdf = fit_kde("g", &normals(10_000, 2), &KdeFitOptions::default()).unwrap();
        let draws = pdf.sample_n(200_000, &mut seeded(3));
        let m = draws.iter().sum::<f64>() / draws.len() as f64;
        let v = draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / draws.len() as f64;
        assert!(m.abs() < 0.05, "mean {m}");
        assert!((v - 1.0).abs() < 0.1, "variance {v}");
        assert!(pdf.mean().abs() < 0.05 && (pdf.variance() - 1.0).abs() < 0.1);
    }

    #[test]
    fn constant_samples_become_point_mass() {
        let pdf = fit_kde("g", &[42.0; 50], &KdeFitOptions::default()).unwrap();
        assert!(pdf.point_mass);
        assert_eq!(pdf.bandwidth, BANDWIDTH_FLOOR);
        let mut r = seeded(5);
        for _ in 0..10_000 {
            assert!((pdf.sample(&mut r) - 42.0).abs() <= 4.0 * BANDWIDTH_FLOOR);
        }
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(
            fit_kde("g", &[1.0; 29], &KdeFitOptions::default()),
            Err(Error::InsufficientSamples { needed: 30, got: 29 })
        ));
    }

    #[test]
    fn normal_upper_quantile() {
        assert!((z_upper(0.05) - 1.6448536269514722).abs() < 1e-9);
    }

    #[test]
    fn quantile_inverts_cdf() {
        let pdf = LoadPdf::new("g", vec![0.0, 1.0, 5.0], 0.7).unwrap();
        for p in [0.01, 0.3, 0.5, 0.9, 0.999] {
            assert!((pdf.cdf(pdf.quantile(p)) - p).abs() < 1e-9);
        }
    }

    #[test]
    fn accepted_scale_is_at_least_one() {
        let pdf = fit_kde("g", &normals(500, 9), &KdeFitOptions::default()).unwrap();
        assert!(pdf.scale >= 1.0 && pdf.accepted);
    }

    #[test]
    fn draws_resemble_fitting_data() {
        let data = normals(300, 21);
        let mut pass = 0;
        for t in 0..100 {
            let pdf = fit_kde("g", &data, &KdeFitOptions { seed: t, ..Default::default() }).unwrap();
            let synth = pdf.sample_n(data.len(), &mut rng::stream(t, rng::tags::KDE, 99));
            if !ks_two_sample(&pdf.sample_points, &synth, 0.05).unwrap().reject {
                pass += 1;
            }
        }
        assert!(pass >= 90, "{pass}/100");
    }
}
