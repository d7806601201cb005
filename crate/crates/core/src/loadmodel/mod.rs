//! Demand densities from smart-meter data and Monte-Carlo operating points.

mod kde;
mod ks;
mod meter;
mod sampler;
mod synth;

pub use kde::{fit_kde, silverman_bandwidth, KdeFitOptions, LoadPdf, BANDWIDTH_FLOOR, MIN_SAMPLES};
pub use ks::{kolmogorov_sf, ks_statistic, ks_two_sample, KsOutcome};
pub use meter::{aggregate_to_transformer, read_meter_csv, write_meter_csv, Reading, SmartMeterSeries};
pub use sampler::{nominal_pdfs, sample_loads, sample_scenario, SamplerConfig, Scenario};
pub use synth::{synth_meter_data, SynthConfig};

use std::collections::BTreeMap;

use crate::Result;

/// Fits one density per transformer group, each with its own split seed.
pub fn fit_group_pdfs(groups: &BTreeMap<String, Vec<f64>>, opts: &KdeFitOptions) -> Result<BTreeMap<String, LoadPdf>> {
    groups
        .iter()
        .enumerate()
        .map(|(i, (g, x))| {
            let o = KdeFitOptions { seed: crate::rng::derive_seed(opts.seed, crate::rng::tags::KDE, i as u64), ..*opts };
            Ok((g.clone(), fit_kde(g, x, &o)?))
        })
        .collect()
}
