//! Synthetic measurement error: bounded Gaussian-mixture channel error,
//! Gaussian total vector error, and multiplicative smart-meter noise.

use num_complex::Complex64;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::loadmodel::Reading;
use crate::rng::Rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    VoltageMagnitude,
    VoltageAngle,
    CurrentMagnitude,
    CurrentAngle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Voltage,
    Current,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: f64,
    pub std: f64,
}

/// Magnitude channels are in per-unit fractions, angle channels in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelGmm {
    pub components: Vec<GmmComponent>,
    pub bound: f64,
}

impl ChannelGmm {
    pub fn symmetric(bound: f64) -> Self {
        let c = |weight, m: f64| GmmComponent { weight, mean: m * bound, std: 0.25 * bound };
        Self { components: vec![c(0.25, -0.4), c(0.5, 0.0), c(0.25, 0.4)], bound }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        if self.components.is_empty()
            || self.components.iter().any(|c| !(c.weight >= 0.0) || !(c.std >= 0.0))
            || (total - 1.0).abs() > 1e-9
        {
            return Err(Error::Invalid(format!("{name}: mixture weights must be non-negative and sum to 1")));
        }
        if !(self.bound > 0.0) {
            return Err(Error::Invalid(format!("{name}: bound must be positive")));
        }
        if self.components.iter().any(|c| c.weight > 0.0 && c.std == 0.0 && c.mean.abs() > self.bound) {
            return Err(Error::Invalid(format!("{name}: degenerate component lies outside the bound")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmSpec {
    pub voltage_magnitude: ChannelGmm,
    pub voltage_angle: ChannelGmm,
    pub current_magnitude: ChannelGmm,
    pub current_angle: ChannelGmm,
}

impl Default for GmmSpec {
    fn default() -> Self {
        Self {
            voltage_magnitude: ChannelGmm::symmetric(0.012),
            voltage_angle: ChannelGmm::symmetric(1.0),
            current_magnitude: ChannelGmm::symmetric(0.024),
            current_angle: ChannelGmm::symmetric(2.0),
        }
    }
}

impl GmmSpec {
    pub fn channel(&self, kind: ChannelKind) -> &ChannelGmm {
        match kind {
            ChannelKind::VoltageMagnitude => &self.voltage_magnitude,
            ChannelKind::VoltageAngle => &self.voltage_angle,
            ChannelKind::CurrentMagnitude => &self.current_magnitude,
            ChannelKind::CurrentAngle => &self.current_angle,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.voltage_magnitude.validate("voltage magnitude")?;
        self.voltage_angle.validate("voltage angle")?;
        self.current_magnitude.validate("current magnitude")?;
        self.current_angle.validate("current angle")
    }

    /// Plain-text table of the mixture parameters.
    pub fn table(&self) -> String {
        let mut s = String::from("channel            bound      weight     mean       std\n");
        for (name, ch) in [
            ("voltage magnitude", &self.voltage_magnitude),
            ("voltage angle", &self.voltage_angle),
            ("current magnitude", &self.current_magnitude),
            ("current angle", &self.current_angle),
        ] {
            for (k, c) in ch.components.iter().enumerate() {
                let label = if k == 0 { name } else { "" };
                let bound = if k == 0 { format!("{:.4}", ch.bound) } else { String::new() };
                s.push_str(&format!("{label:<18} {bound:<10} {:<10.4} {:<10.5} {:<10.5}\n", c.weight, c.mean, c.std));
            }
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TveSpec {
    pub tve_limit: f64,
}

impl Default for TveSpec {
    fn default() -> Self {
        Self { tve_limit: 0.01 }
    }
}

impl TveSpec {
    /// Per-axis standard deviation for a phasor of magnitude `mag`.
    pub fn sigma(&self, mag: f64) -> f64 {
        self.tve_limit * mag / (3.0 * std::f64::consts::SQRT_2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMode {
    None,
    GaussianTveOnly,
    #[default]
    TwoLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorModelConfig {
    pub mode: ErrorMode,
    #[serde(default)]
    pub gmm: GmmSpec,
    #[serde(default)]
    pub tve: TveSpec,
    #[serde(default = "default_meter_noise")]
    pub meter_noise_pct: f64,
}

fn default_meter_noise() -> f64 {
    10.0
}

impl Default for ErrorModelConfig {
    fn default() -> Self {
        Self { mode: ErrorMode::TwoLevel, gmm: GmmSpec::default(), tve: TveSpec::default(), meter_noise_pct: 10.0 }
    }
}

impl ErrorModelConfig {
    pub fn with_mode(mode: ErrorMode) -> Self {
        Self { mode, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        self.gmm.validate()?;
        if !(self.tve.tve_limit >= 0.0) || !(self.meter_noise_pct >= 0.0) {
            return Err(Error::Invalid("TVE limit and meter noise must be non-negative".into()));
        }
        Ok(())
    }
}

/// Picks a component by weight, draws from it, and redraws until the
/// value falls inside the channel bound.
pub fn sample_gmm_channel_error(spec: &GmmSpec, kind: ChannelKind, rng: &mut Rng) -> f64 {
    let ch = spec.channel(kind);
    loop {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = &ch.components[ch.components.len() - 1];
        for c in &ch.components {
            acc += c.weight;
            if u < acc {
                pick = c;
                break;
            }
        }
        let z: f64 = StandardNormal.sample(rng);
        let e = pick.mean + pick.std * z;
        if e.abs() <= ch.bound {
            return e;
        }
    }
}

/// Returns the perturbed phasor, or the input and `false` when |X| = 0.
pub fn apply_gaussian_tve(x: Complex64, spec: &TveSpec, rng: &mut Rng) -> (Complex64, bool) {
    let mag = x.norm();
    if mag == 0.0 {
        return (x, false);
    }
    let s = spec.sigma(mag);
    if s == 0.0 {
        return (x, true);
    }
    let n = Normal::new(0.0, s).expect("finite sigma");
    (x + Complex64::new(n.sample(rng), n.sample(rng)), true)
}

pub fn tve(measured: Complex64, truth: Complex64) -> f64 {
    (measured - truth).norm() / truth.norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasorMeasurement {
    pub quantity: Quantity,
    pub value: Complex64,
}

/// Channel error on magnitude and angle, then Gaussian TVE on the result.
pub fn apply_two_level_error(meas: &[PhasorMeasurement], cfg: &ErrorModelConfig, rng: &mut Rng) -> Vec<PhasorMeasurement> {
    meas.iter()
        .map(|m| {
            let value = match cfg.mode {
                ErrorMode::None => m.value,
                ErrorMode::GaussianTveOnly => apply_gaussian_tve(m.value, &cfg.tve, rng).0,
                ErrorMode::TwoLevel => {
                    let (mk, ak) = match m.quantity {
                        Quantity::Voltage => (ChannelKind::VoltageMagnitude, ChannelKind::VoltageAngle),
                        Quantity::Current => (ChannelKind::CurrentMagnitude, ChannelKind::CurrentAngle),
                    };
                    let em = sample_gmm_channel_error(&cfg.gmm, mk, rng);
                    let ea = sample_gmm_channel_error(&cfg.gmm, ak, rng);
                    let level1 = Complex64::from_polar(m.value.norm() * (1.0 + em), m.value.arg() + ea.to_radians());
                    apply_gaussian_tve(level1, &cfg.tve, rng).0
                }
            };
            PhasorMeasurement { quantity: m.quantity, value }
        })
        .collect()
}

/// Each energy scaled by `1 + e`, `e` Gaussian with 3 sigma at `pct` percent,
/// redrawn until inside ±pct percent.
pub fn perturb_smart_meter(readings: &[Reading], pct: f64, rng: &mut Rng) -> Vec<Reading> {
    if pct <= 0.0 {
        return readings.to_vec();
    }
    let bound = pct / 100.0;
    let sigma = pct / 300.0;
    readings
        .iter()
        .map(|r| {
            let e = loop {
                let z: f64 = StandardNormal.sample(rng);
                if (sigma * z).abs() <= bound {
                    break sigma * z;
                }
            };
            Reading { interval_hours: r.interval_hours, energy_kwh: r.energy_kwh * (1.0 + e) }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loadmodel::ks_two_sample;
    use crate::rng::seeded;

    #[test]
    fn default_draws_respect_bounds() {
        let spec = GmmSpec::default();
        let mut r = seeded(1);
        for (kind, b) in [
            (ChannelKind::VoltageMagnitude, 0.012),
            (ChannelKind::VoltageAngle, 1.0),
            (ChannelKind::CurrentMagnitude, 0.024),
            (ChannelKind::CurrentAngle, 2.0),
        ] {
            for _ in 0..20_000 {
                assert!(sample_gmm_channel_error(&spec, kind, &mut r).abs() <= b);
            }
        }
    }

    #[test]
    fn degenerate_mixture_is_constant() {
        let mut spec = GmmSpec::default();
        spec.voltage_magnitude.components = vec![GmmComponent { weight: 1.0, mean: 0.005, std: 0.0 }];
        spec.validate().unwrap();
        let mut r = seeded(2);
        for _ in 0..100 {
            assert_eq!(sample_gmm_channel_error(&spec, ChannelKind::VoltageMagnitude, &mut r), 0.005);
        }
    }

    #[test]
    fn single_weight_matches_its_gaussian() {
        let mut spec = GmmSpec::default();
        let c = GmmComponent { weight: 1.0, mean: 0.3, std: 0.2 };
        spec.voltage_angle.components = vec![c, GmmComponent { weight: 0.0, ..c }, GmmComponent { weight: 0.0, mean: -0.5, std: 0.1 }];
        spec.voltage_angle.bound = 10.0;
        let mut r = seeded(3);
        let x: Vec<f64> = (0..5000).map(|_| sample_gmm_channel_error(&spec, ChannelKind::VoltageAngle, &mut r)).collect();
        let n = Normal::new(0.3, 0.2).unwrap();
        let mut o = seeded(4);
        let y: Vec<f64> = (0..5000).map(|_| n.sample(&mut o)).collect();
        assert!(!ks_two_sample(&x, &y, 0.01).unwrap().reject);
    }

    #[test]
    fn bad_weights_rejected() {
        let mut spec = GmmSpec::default();
        spec.current_angle.components[0].weight = 0.3;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn zero_tve_is_identity() {
        let x = Complex64::new(0.3, -0.9);
        assert_eq!(apply_gaussian_tve(x, &TveSpec { tve_limit: 0.0 }, &mut seeded(0)), (x, true));
        let z = Complex64::new(0.0, 0.0);
        assert_eq!(apply_gaussian_tve(z, &TveSpec::default(), &mut seeded(0)), (z, false));
    }

    #[test]
    fn tve_definition() {
        assert!((tve(Complex64::new(1.01, 0.0), Complex64::new(1.0, 0.0)) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn tve_within_limit_fraction() {
        // |dX|/|X| = sigma_rel * chi_2, so P(TVE <= 1%) = P(chi2_2 <= 18) = 1 - e^-9.
        let oracle = 1.0 - (-9.0f64).exp();
        let mut r = seeded(5);
        let x = Complex64::from_polar(1.3, 0.4);
        let n = 100_000;
        let ok = (0..n).filter(|_| tve(apply_gaussian_tve(x, &TveSpec::default(), &mut r).0, x) <= 0.01).count();
        let frac = ok as f64 / n as f64;
        assert!(frac >= 0.995 && frac <= 1.0);
        assert!((frac - oracle).abs() < 5.0 * (oracle * (1.0 - oracle) / n as f64).sqrt() + 1e-5);
    }

    #[test]
    fn mode_none_is_verbatim() {
        let m = vec![PhasorMeasurement { quantity: Quantity::Voltage, value: Complex64::new(1.0, 0.2) }];
        assert_eq!(apply_two_level_error(&m, &ErrorModelConfig::with_mode(ErrorMode::None), &mut seeded(1)), m);
    }

    #[test]
    fn two_level_has_larger_magnitude_error() {
        let m = vec![PhasorMeasurement { quantity: Quantity::Voltage, value: Complex64::from_polar(1.0, -0.5) }; 10_000];
        let err = |mode| {
            let out = apply_two_level_error(&m, &ErrorModelConfig::with_mode(mode), &mut seeded(9));
            out.iter().map(|o| (o.value.norm() - 1.0).abs()).sum::<f64>() / out.len() as f64
        };
        assert!(err(ErrorMode::TwoLevel) > err(ErrorMode::GaussianTveOnly));
    }

    #[test]
    fn meter_noise_bounds() {
        let rd: Vec<Reading> = (0..5000).map(|k| Reading { interval_hours: 1.0, energy_kwh: 1.0 + k as f64 }).collect();
        assert_eq!(perturb_smart_meter(&rd, 0.0, &mut seeded(1)), rd);
        let noisy = perturb_smart_meter(&rd, 10.0, &mut seeded(1));
        for (a, b) in noisy.iter().zip(&rd) {
            assert!((a.energy_kwh / b.energy_kwh - 1.0).abs() <= 0.1 + 1e-12);
        }
        let e: Vec<f64> = noisy.iter().zip(&rd).map(|(a, b)| a.energy_kwh / b.energy_kwh - 1.0).collect();
        let sd = (e.iter().map(|x| x * x).sum::<f64>() / e.len() as f64).sqrt();
        assert!((sd - 0.1 / 3.0).abs() < 0.002);
    }

    #[test]
    fn same_seed_same_noise() {
        let m = vec![PhasorMeasurement { quantity: Quantity::Current, value: Complex64::new(0.1, 0.05) }; 50];
        let cfg = ErrorModelConfig::default();
        assert_eq!(apply_two_level_error(&m, &cfg, &mut seeded(3)), apply_two_level_error(&m, &cfg, &mut seeded(3)));
    }
}
