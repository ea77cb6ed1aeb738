//! Spectral clustering of the symmetrized aggregate count matrix.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::Event;

const RESTARTS: usize = 20;
const MAX_ITERS: usize = 200;

/// Partition of `m` nodes from spectral clustering on `C + Cᵀ`, where `C_ij`
/// counts events from `i` to `j`. An all-zero matrix yields a uniform random
/// partition.
pub fn spectral_count_baseline(events: &[Event], m: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k == 0 || k > m {
        return Err(Error::invalid(format!("need 1 <= K <= m, got K={k}, m={m}")));
    }
    if k == 1 {
        return Ok(vec![0; m]);
    }
    let mut sym = DMatrix::<f64>::zeros(m, m);
    for e in events {
        let (s, d) = (e.src as usize, e.dst as usize);
        if s >= m || d >= m {
            return Err(Error::NodeOutOfRange {
                id: e.src.max(e.dst),
                m,
            });
        }
        sym[(s, d)] += 1.0;
        sym[(d, s)] += 1.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if sym.iter().all(|&v| v == 0.0) {
        log::warn!("count matrix is all zero; returning a random partition");
        return Ok((0..m).map(|_| rng.gen_range(0..k)).collect());
    }
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].abs().total_cmp(&eig.eigenvalues[a].abs()));
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|i| order[..k].iter().map(|&c| eig.eigenvectors[(i, c)]).collect())
        .collect();
    Ok(kmeans(&rows, k, RESTARTS, &mut rng).0)
}

/// Lloyd's k-means with k-means++ seeding; best of `restarts` by within-cluster SSE.
pub fn kmeans<R: Rng>(points: &[Vec<f64>], k: usize, restarts: usize, rng: &mut R) -> (Vec<usize>, f64) {
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    let n = points.len();
    let mut best = (vec![0; n], f64::INFINITY);
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    for _ in 0..restarts.max(1) {
        let mut centers = vec![points[rng.gen_range(0..n)].clone()];
        while centers.len() < k {
            let d2: Vec<f64> = points
                .iter()
                .map(|p| centers.iter().map(|c| dist(p, c)).fold(f64::INFINITY, f64::min))
                .collect();
            let total: f64 = d2.iter().sum();
            let pick = if total > 0.0 {
                let mut u = rng.gen::<f64>() * total;
                d2.iter()
                    .position(|&w| {
                        u -= w;
                        u <= 0.0
                    })
                    .unwrap_or(n - 1)
            } else {
                rng.gen_range(0..n)
            };
            centers.push(points[pick].clone());
        }
        let mut labels = vec![usize::MAX; n];
        for _ in 0..MAX_ITERS {
            let mut changed = false;
            for (i, p) in points.iter().enumerate() {
                let mut arg = 0;
                let mut bd = f64::INFINITY;
                for (c, ctr) in centers.iter().enumerate() {
                    let d = dist(p, ctr);
                    if d < bd {
                        bd = d;
                        arg = c;
                    }
                }
                if labels[i] != arg {
                    labels[i] = arg;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
            let dim = points[0].len();
            let mut sums = vec![vec![0.0; dim]; k];
            let mut counts = vec![0usize; k];
            for (p, &c) in points.iter().zip(&labels) {
                counts[c] += 1;
                for (s, v) in sums[c].iter_mut().zip(p) {
                    *s += v;
                }
            }
            for c in 0..k {
                if counts[c] > 0 {
                    centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
                }
            }
        }
        let sse: f64 = points.iter().zip(&labels).map(|(p, &c)| dist(p, &centers[c])).sum();
        if sse < best.1 {
            best = (labels, sse);
        }
    }
    best
}
