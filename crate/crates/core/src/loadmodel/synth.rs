//! Synthetic smart-meter histories for the metered load groups of a feeder.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use super::meter::{Reading, SmartMeterSeries};
use crate::feeder::FeederModel;
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub days: usize,
    pub interval_hours: f64,
    pub meters_per_group: usize,
    /// Mean group demand as a fraction of the nameplate load.
    pub mean_fraction: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { days: 365, interval_hours: 1.0, meters_per_group: 3, mean_fraction: 0.7, noise_sigma: 0.15, seed: 0 }
    }
}

/// Residential-looking daily shape with a morning and an evening peak.
fn daily_shape(hour: f64) -> f64 {
    let bump = |c: f64, w: f64| (-0.5 * ((hour - c) / w).powi(2)).exp();
    0.55 + 0.35 * bump(8.0, 1.5) + 0.6 * bump(19.0, 2.5)
}

fn seasonal(day: f64) -> f64 {
    1.0 + 0.15 * (2.0 * PI * (day - 15.0) / 365.0).cos()
}

pub fn synth_meter_data(model: &FeederModel, cfg: &SynthConfig) -> Result<Vec<SmartMeterSeries>> {
    if cfg.days == 0 || !(cfg.interval_hours > 0.0) || cfg.meters_per_group == 0 {
        return Err(Error::Invalid("synthetic meter data needs days, interval and meters".into()));
    }
    let slots_per_day = (24.0 / cfg.interval_hours).round() as usize;
    let n = cfg.days * slots_per_day;
    let mut shape = Vec::with_capacity(n);
    for t in 0..n {
        let hour = (t % slots_per_day) as f64 * cfg.interval_hours;
        shape.push(daily_shape(hour) * seasonal((t / slots_per_day) as f64));
    }
    let mean_shape = shape.iter().sum::<f64>() / n as f64;
    let noise = LogNormal::new(-0.5 * cfg.noise_sigma * cfg.noise_sigma, cfg.noise_sigma)
        .map_err(|e| Error::Invalid(e.to_string()))?;

    let mut nominal: BTreeMap<&str, f64> = BTreeMap::new();
    for l in &model.loads {
        if let Some(g) = &l.meter_group {
            *nominal.entry(g).or_default() += l.nominal_p_kw();
        }
    }
    let mut out = Vec::new();
    for (gi, (g, p)) in nominal.into_iter().enumerate() {
        let mut r = rng::stream(cfg.seed, rng::tags::METER, gi as u64);
        let w: Vec<f64> = (0..cfg.meters_per_group).map(|_| r.random_range(0.5..1.5)).collect();
        let wsum: f64 = w.iter().sum();
        for (k, wk) in w.iter().enumerate() {
            let scale = cfg.mean_fraction * p * wk / wsum / mean_shape;
            let shift = r.random_range(0..3usize);
            let readings = (0..n)
                .map(|t| {
                    let s = shape[(t + shift) % n];
                    Reading { interval_hours: cfg.interval_hours, energy_kwh: scale * s * noise.sample(&mut r) * cfg.interval_hours }
                })
                .collect();
            out.push(SmartMeterSeries { meter_id: format!("{g}-m{k}"), transformer_group: g.to_string(), readings });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::loadmodel::aggregate_to_transformer;

    #[test]
    fn group_means_track_nameplate() {
        let m = fixtures::ieee34();
        let cfg = SynthConfig { days: 60, ..Default::default() };
        let agg = aggregate_to_transformer(&synth_meter_data(&m, &cfg).unwrap()).unwrap();
        let groups: std::collections::BTreeSet<_> = m.loads.iter().filter_map(|l| l.meter_group.clone()).collect();
        assert_eq!(agg.len(), groups.len());
        for l in &m.loads {
            let g = l.meter_group.as_ref().unwrap();
            let mean = agg[g].iter().sum::<f64>() / agg[g].len() as f64;
            assert!((mean / (0.7 * l.nominal_p_kw()) - 1.0).abs() < 0.1, "{g}");
        }
    }
}
