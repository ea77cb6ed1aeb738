//! Evaluation: community recovery, parameter recovery, link prediction and regret.

mod predict;
mod regret;
mod spectral;

pub use predict::{count_per_pair, predict_counts, rmse, PredictMode};
pub use regret::{regret_trace, window_losses};
pub use spectral::{kmeans, spectral_count_baseline};

use ndarray::Array2;
use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nmi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intensity_recovery: Option<f64>,
    /// Mean absolute elementwise error of the baseline matrix after Hungarian
    /// label alignment. A diagnostic only; `intensity_recovery` is the headline metric.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aligned_mae: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rmse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_dense: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub frobenius_trace: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub regret_trace: Vec<f64>,
}

fn entropy(counts: &[f64], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / n;
            -p * p.ln()
        })
        .sum()
}

fn relabel(z: &[usize]) -> (Vec<usize>, usize) {
    let mut map = std::collections::HashMap::new();
    let out = z
        .iter()
        .map(|c| {
            let next = map.len();
            *map.entry(*c).or_insert(next)
        })
        .collect();
    (out, map.len())
}

/// Normalized mutual information `I(a;b) / sqrt(H(a) H(b))` (natural logs).
///
/// Two single-cluster partitions score 1; a single-cluster partition against
/// any other scores 0.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Ok(1.0);
    }
    let (a, ka) = relabel(a);
    let (b, kb) = relabel(b);
    let n = a.len() as f64;
    let mut joint = vec![0.0; ka * kb];
    let mut ca = vec![0.0; ka];
    let mut cb = vec![0.0; kb];
    for (&x, &y) in a.iter().zip(&b) {
        joint[x * kb + y] += 1.0;
        ca[x] += 1.0;
        cb[y] += 1.0;
    }
    let (ha, hb) = (entropy(&ca, n), entropy(&cb, n));
    if ha == 0.0 && hb == 0.0 {
        return Ok(1.0);
    }
    if ha == 0.0 || hb == 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for x in 0..ka {
        for y in 0..kb {
            let c = joint[x * kb + y];
            if c > 0.0 {
                mi += c / n * (c * n / (ca[x] * cb[y])).ln();
            }
        }
    }
    Ok((mi / (ha * hb).sqrt()).clamp(0.0, 1.0))
}

/// `(1/K²) |Σ B_true - Σ B_hat|`.
pub fn intensity_recovery(b_true: &Array2<f64>, b_hat: &Array2<f64>) -> f64 {
    let k = b_true.nrows() as f64;
    (b_true.sum() - b_hat.sum()).abs() / (k * k)
}

/// Label map `estimated class -> true class` maximizing the overlap on the
/// nodes selected by `mask` (all nodes when `None`).
pub fn align_labels(z_hat: &[usize], z_star: &[usize], k: usize, mask: Option<&[usize]>) -> Vec<usize> {
    let mut overlap = Matrix::new(k, k, 0i64);
    let nodes: Box<dyn Iterator<Item = usize>> = match mask {
        Some(m) => Box::new(m.iter().copied()),
        None => Box::new(0..z_hat.len()),
    };
    for i in nodes {
        if z_hat[i] < k && z_star[i] < k {
            overlap[(z_hat[i], z_star[i])] += 1;
        }
    }
    kuhn_munkres(&overlap).1
}

/// Relabels fitted parameters into the ground-truth labeling implied by `z_hat` vs `z_star`.
pub fn align_params(params: &ModelParams, z_hat: &[usize], z_star: &[usize]) -> ModelParams {
    let perm = align_labels(z_hat, z_star, params.n_classes(), None);
    params.permuted(&perm)
}

/// Mean absolute elementwise difference of mean baselines after alignment.
pub fn aligned_mae(truth: &ModelParams, fitted: &ModelParams, z_hat: &[usize], z_star: &[usize]) -> f64 {
    let aligned = align_params(fitted, z_hat, z_star);
    let (a, b) = (truth.mean_baseline(), aligned.mean_baseline());
    (&a - &b).mapv(f64::abs).mean().unwrap_or(0.0)
}

/// Fraction of dense nodes classified correctly under the best label alignment.
pub fn r_dense(z_hat: &[usize], z_star: &[usize], dense: &[usize]) -> Result<f64> {
    if dense.is_empty() {
        return Err(Error::invalid("dense node set is empty"));
    }
    if z_hat.len() != z_star.len() {
        return Err(Error::LengthMismatch {
            left: z_hat.len(),
            right: z_star.len(),
        });
    }
    let k = z_hat.iter().chain(z_star).copied().max().unwrap_or(0) + 1;
    let perm = align_labels(z_hat, z_star, k, Some(dense));
    let hits = dense.iter().filter(|&&i| perm[z_hat[i]] == z_star[i]).count();
    Ok(hits as f64 / dense.len() as f64)
}
