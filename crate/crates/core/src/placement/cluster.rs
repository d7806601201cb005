//! Rank correlation between node voltages and threshold clustering.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[idx[k]] = r;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpearmanMatrix {
    pub rho: Vec<Vec<f64>>,
    /// Series with no variation; their off-diagonal entries are 0.
    pub constant: Vec<bool>,
}

/// Pairwise Spearman correlation of the given series (one per node-phase).
pub fn spearman_matrix(series: &[Vec<f64>]) -> Result<SpearmanMatrix> {
    let n = series.first().map_or(0, Vec::len);
    if n < 30 {
        return Err(Error::InsufficientSamples { needed: 30, got: n });
    }
    if series.iter().any(|s| s.len() != n) {
        return Err(Error::Invalid("series lengths differ".into()));
    }
    let mut centred = Vec::with_capacity(series.len());
    let mut constant = Vec::with_capacity(series.len());
    for s in series {
        let r = average_ranks(s);
        let m = r.iter().sum::<f64>() / n as f64;
        let c: Vec<f64> = r.iter().map(|v| v - m).collect();
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        constant.push(norm == 0.0);
        centred.push(if norm == 0.0 { c } else { c.iter().map(|v| v / norm).collect() });
    }
    let k = series.len();
    let mut rho = vec![vec![0.0; k]; k];
    for i in 0..k {
        rho[i][i] = 1.0;
        for j in i + 1..k {
            let v = if constant[i] || constant[j] {
                0.0
            } else {
                centred[i].iter().zip(&centred[j]).map(|(a, b)| a * b).sum::<f64>().clamp(-1.0, 1.0)
            };
            rho[i][j] = v;
            rho[j][i] = v;
        }
    }
    Ok(SpearmanMatrix { rho, constant })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    #[default]
    Single,
    Complete,
    Average,
}

/// Agglomeration on `1 - rho`, merging while the closest pair of clusters is
/// within `tau`. Clusters are returned sorted by their smallest member; ties
/// in distance merge the lowest indices first.
pub fn cluster_voltages(rho: &[Vec<f64>], tau: f64, linkage: Linkage) -> Vec<Vec<usize>> {
    let n = rho.len();
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut dist: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| 1.0 - rho[i][j]).collect()).collect();
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let d = dist[a][b];
                if best.is_none_or(|(_, _, bd)| d < bd) {
                    best = Some((a, b, d));
                }
            }
        }
        match best {
            Some((a, b, d)) if d <= tau => {
                let moved = clusters.remove(b);
                let (na, nb) = (clusters[a].len() as f64, moved.len() as f64);
                clusters[a].extend(moved);
                clusters[a].sort_unstable();
                let row_b = dist.remove(b);
                for row in dist.iter_mut() {
                    row.remove(b);
                }
                for k in 0..clusters.len() {
                    let kb = if k < b { row_b[k] } else { row_b[k + 1] };
                    let v = match linkage {
                        Linkage::Single => dist[a][k].min(kb),
                        Linkage::Complete => dist[a][k].max(kb),
                        Linkage::Average => (na * dist[a][k] + nb * kb) / (na + nb),
                    };
                    if k != a {
                        dist[a][k] = v;
                        dist[k][a] = v;
                    }
                }
            }
            _ => break,
        }
    }
    clusters.sort_by_key(|c| c[0]);
    clusters
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(n: usize) -> Vec<f64> {
        (0..n).map(|i| ((i * 37) % 101) as f64).collect()
    }

    #[test]
    fn monotone_maps() {
        let x = ramp(40);
        let up: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let down: Vec<f64> = x.iter().map(|v| -v).collect();
        let m = spearman_matrix(&[x, up, down]).unwrap();
        assert!((m.rho[0][1] - 1.0).abs() < 1e-12);
        assert!((m.rho[0][2] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn ties_use_average_ranks() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn constant_series_flagged() {
        let m = spearman_matrix(&[ramp(30), vec![1.0; 30]]).unwrap();
        assert!(m.constant[1] && !m.constant[0]);
        assert_eq!(m.rho[0][1], 0.0);
        assert!(spearman_matrix(&[ramp(29)]).is_err());
    }

    #[test]
    fn block_matrix_recovers_blocks() {
        let blocks = [0, 0, 1, 1, 1, 2];
        let rho: Vec<Vec<f64>> = (0..6).map(|i| (0..6).map(|j| if blocks[i] == blocks[j] { 1.0 } else { 0.0 }).collect()).collect();
        assert_eq!(cluster_voltages(&rho, 0.05, Linkage::Complete), vec![vec![0, 1], vec![2, 3, 4], vec![5]]);
        assert_eq!(cluster_voltages(&rho, 2.0, Linkage::Complete), vec![vec![0, 1, 2, 3, 4, 5]]);
    }

    proptest! {
        #[test]
        fn rank_invariance(x in proptest::collection::vec(-10.0f64..10.0, 30..60), y in proptest::collection::vec(-10.0f64..10.0, 60)) {
            let y = y[..x.len()].to_vec();
            let t: Vec<f64> = x.iter().map(|v| v * 3.0 + v.powi(3)).collect();
            let a = spearman_matrix(&[x.clone(), y.clone()]).unwrap().rho[0][1];
            let b = spearman_matrix(&[t, y]).unwrap().rho[0][1];
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn clusters_partition(vals in proptest::collection::vec(-1.0f64..1.0, 36), tau in 0.0f64..2.0, which in 0usize..3) {
            let linkage = [Linkage::Single, Linkage::Complete, Linkage::Average][which];
            let n = 6;
            let mut rho = vec![vec![1.0; n]; n];
            for i in 0..n { for j in i + 1..n { rho[i][j] = vals[i * n + j]; rho[j][i] = vals[i * n + j]; } }
            let c = cluster_voltages(&rho, tau, linkage);
            let mut all: Vec<usize> = c.into_iter().flatten().collect();
            all.sort();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }
}
