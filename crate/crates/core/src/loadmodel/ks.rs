//! Two-sample Kolmogorov-Smirnov test.

use std::f64::consts::PI;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsOutcome {
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
}

/// Survival function of the limiting Kolmogorov distribution, P(K > lambda).
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi theta form converges fast for small arguments.
        let c = -PI * PI / (8.0 * lambda * lambda);
        let mut cdf = 0.0;
        for k in 1..=20 {
            let m = (2 * k - 1) as f64;
            cdf += (c * m * m).exp();
        }
        (1.0 - (2.0 * PI).sqrt() / lambda * cdf).clamp(0.0, 1.0)
    } else {
        let mut sf = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            sf += if k % 2 == 1 { term } else { -term };
            if term < 1e-300 {
                break;
            }
        }
        (2.0 * sf).clamp(0.0, 1.0)
    }
}

/// Largest vertical gap between the two empirical CDFs.
pub fn ks_statistic(x: &[f64], y: &[f64]) -> f64 {
    let mut a = x.to_vec();
    let mut b = y.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let t = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// p-value from the asymptotic distribution at `sqrt(nm/(n+m)) * D`.
pub fn ks_two_sample(x: &[f64], y: &[f64], alpha: f64) -> Result<KsOutcome> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Invalid("KS input contains non-finite values".into()));
    }
    let statistic = ks_statistic(x, y);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let p_value = kolmogorov_sf((n * m / (n + m)).sqrt() * statistic);
    Ok(KsOutcome { statistic, p_value, reject: p_value < alpha })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn limiting_distribution_matches_reference_values() {
        // scipy.special.kolmogorov
        let table = [
            (0.3, 0.9999906941986655),
            (0.5, 0.9639452436648751),
            (0.8, 0.5441424115741981),
            (1.0, 0.26999967167735456),
            (1.2, 0.11224966667072497),
            (1.36, 0.049485876755377876),
            (1.5, 0.022217962616525127),
            (2.0, 0.0006709252557796953),
            (3.0, 3.045995948942526e-08),
        ];
        for (l, p) in table {
            assert!((kolmogorov_sf(l) - p).abs() < 1e-10, "lambda {l}");
        }
    }

    #[test]
    fn both_series_agree_at_the_switch_point() {
        let l: f64 = 1.18;
        let mut sf = 0.0;
        for k in 1..=50 {
            let kf = k as f64;
            sf += if k % 2 == 1 { 1.0 } else { -1.0 } * (-2.0 * kf * kf * l * l).exp();
        }
        assert!((kolmogorov_sf(l - 1e-12) - 2.0 * sf).abs() < 1e-10);
    }

    #[test]
    fn identical_samples_are_not_rejected() {
        let x = [1.0, 2.0, 2.0, 5.0, 7.5];
        let out = ks_two_sample(&x, &x, 0.05).unwrap();
        assert_eq!(out.statistic, 0.0);
        assert!(!out.reject);
    }

    #[test]
    fn statistic_by_hand() {
        let out = ks_two_sample(&[1.0, 2.0, 3.0], &[2.5, 3.5], 0.05).unwrap();
        assert!((out.statistic - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(ks_statistic(&[0.0], &[1.0]), 1.0);
    }

    #[test]
    fn shifted_normals_are_rejected() {
        let mut r = seeded(11);
        let x: Vec<f64> = (0..500).map(|_| StandardNormal.sample(&mut r)).collect();
        let y: Vec<f64> = (0..500).map(|_| 5.0 + Distribution::<f64>::sample(&StandardNormal, &mut r)).collect();
        assert!(ks_two_sample(&x, &y, 0.05).unwrap().reject);
    }

    #[test]
    fn empty_input_errors() {
        assert!(ks_two_sample(&[], &[1.0], 0.05).is_err());
    }
}
