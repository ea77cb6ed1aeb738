use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{EdgeList, Event, ModelParams};
use crate::online::HistoryStore;
use crate::simulate::simulate_block;

/// How Hawkes expected counts are computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PredictMode {
    /// Stationary mean plus the decaying transient left by the stored history.
    Analytic,
    /// Average over simulated continuations from the stored history.
    MonteCarlo { paths: usize, seed: u64 },
}

/// Expected event count for every pair of `edges` on `[t0, t1]`, mixing the
/// block predictions with weights `tau_ik tau_jl`.
///
/// For Hawkes models `store` supplies each pair's recent history; for the
/// analytic mode with mean baseline `μ̄` and `κ = λ(1-b)` the block count is
/// `μ̄ L / (1-b) + b (x₀ - μ̄/(1-b)) (1 - e^{-κL}) / κ`, where `x₀` is the
/// excitation carried in from the history. This is exact when the baseline is constant.
pub fn predict_counts(
    params: &ModelParams,
    tau: &Array2<f64>,
    edges: &EdgeList,
    t0: f64,
    t1: f64,
    store: Option<&HistoryStore>,
    mode: PredictMode,
) -> Result<Vec<f64>> {
    if t1 < t0 {
        return Err(Error::invalid(format!("prediction horizon [{t0}, {t1}] is reversed")));
    }
    params.check_stationary()?;
    let k = params.n_classes();
    let len = t1 - t0;
    if len == 0.0 {
        return Ok(vec![0.0; edges.len()]);
    }
    let decay = params.decay();
    let mean_base = params.mean_baseline();
    let mut out = Vec::with_capacity(edges.len());
    for (p, &(s, d)) in edges.pairs().iter().enumerate() {
        let history: Vec<f64> = store
            .and_then(|st| st.queue(s, d))
            .map(|q| q.iter().copied().filter(|&t| t <= t0).collect())
            .unwrap_or_default();
        let mut total = 0.0;
        for a in 0..k {
            for b in 0..k {
                let w = tau[[s as usize, a]] * tau[[d as usize, b]];
                if w < 1e-12 {
                    continue;
                }
                let count = match (decay, mode) {
                    (None, _) => params.baseline_integral(a, b, t0, t1),
                    (Some(lam), PredictMode::Analytic) => {
                        let exc = params.excitation(a, b);
                        let mu = mean_base[[a, b]];
                        let x_star = mu / (1.0 - exc);
                        let x0: f64 = history.iter().map(|&h| lam * (-lam * (t0 - h)).exp()).sum();
                        let kappa = lam * (1.0 - exc);
                        x_star * len + exc * (x0 - x_star) * (-(-kappa * len).exp_m1()) / kappa
                    }
                    (Some(_), PredictMode::MonteCarlo { paths, seed }) => {
                        let mut rng = ChaCha8Rng::seed_from_u64(seed);
                        rng.set_stream(((p as u64) << 16) | (a * k + b) as u64);
                        let n: usize = (0..paths.max(1))
                            .map(|_| simulate_block(params, a, b, t0, t1, &history, &mut rng).len())
                            .sum();
                        n as f64 / paths.max(1) as f64
                    }
                };
                total += w * count;
            }
        }
        out.push(total);
    }
    Ok(out)
}

/// Observed event count per pair of `edges`; events off the edge list are rejected.
pub fn count_per_pair(events: &[Event], edges: &EdgeList) -> Result<Vec<f64>> {
    let mut counts = vec![0.0; edges.len()];
    for e in events {
        counts[edges.locate(e)?] += 1.0;
    }
    Ok(counts)
}

/// Root mean squared error over pairs.
pub fn rmse(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: actual.len(),
        });
    }
    if predicted.is_empty() {
        return Ok(0.0);
    }
    let sq: f64 = predicted.iter().zip(actual).map(|(p, a)| (p - a).powi(2)).sum();
    Ok((sq / predicted.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn one_hot_pair() -> (EdgeList, Array2<f64>) {
        (EdgeList::new(2, [(0, 1)]).unwrap(), array![[1.0, 0.0], [0.0, 1.0]])
    }

    #[test]
    fn poisson_expected_count() {
        let (edges, tau) = one_hot_pair();
        let p = ModelParams::HomPoisson {
            rates: array![[0.1, 0.6], [0.2, 0.3]],
        };
        let c = predict_counts(&p, &tau, &edges, 5.0, 15.0, None, PredictMode::Analytic).unwrap();
        assert!((c[0] - 6.0).abs() < 1e-12);
        let z = predict_counts(&p, &tau, &edges, 5.0, 5.0, None, PredictMode::Analytic).unwrap();
        assert_eq!(z, vec![0.0]);
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[2.0, 3.0, 4.0], &[1.0, 2.0, 3.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!(rmse(&[1.0], &[]).is_err());
    }

    #[test]
    fn non_stationary_is_rejected() {
        let (edges, tau) = one_hot_pair();
        let p = ModelParams::HomHawkes {
            baseline: array![[0.5, 0.5], [0.5, 0.5]],
            excitation: array![[0.5, 1.2], [0.5, 0.5]],
            decay: 1.0,
        };
        let r = predict_counts(&p, &tau, &edges, 0.0, 1.0, None, PredictMode::Analytic);
        assert!(matches!(r, Err(Error::NonStationary { .. })));
    }

    #[test]
    fn hawkes_analytic_agrees_with_monte_carlo() {
        let edges = EdgeList::new(2, [(0, 1)]).unwrap();
        let tau = array![[1.0], [1.0]];
        let p = ModelParams::HomHawkes {
            baseline: array![[0.5]],
            excitation: array![[0.5]],
            decay: 1.0,
        };
        let analytic = predict_counts(&p, &tau, &edges, 0.0, 100.0, None, PredictMode::Analytic).unwrap()[0];
        // 100 / (1 - b) · μ minus the start-up deficit b · x* / κ = 1
        assert!((analytic - 99.0).abs() < 1e-9);
        let mc = predict_counts(&p, &tau, &edges, 0.0, 100.0, None, PredictMode::MonteCarlo { paths: 10_000, seed: 1 })
            .unwrap()[0];
        assert!((mc - analytic).abs() / analytic < 0.03, "{mc} vs {analytic}");
    }

    #[test]
    fn hawkes_history_raises_prediction() {
        let edges = EdgeList::new(2, [(0, 1)]).unwrap();
        let tau = array![[1.0], [1.0]];
        let p = ModelParams::HomHawkes {
            baseline: array![[0.3]],
            excitation: array![[0.6]],
            decay: 2.0,
        };
        let mut store = HistoryStore::queues(10.0);
        store.absorb(10.0, &[Event::new(0, 1, 9.0), Event::new(0, 1, 9.5), Event::new(0, 1, 9.9)]);
        let cold = predict_counts(&p, &tau, &edges, 10.0, 12.0, None, PredictMode::Analytic).unwrap()[0];
        let warm = predict_counts(&p, &tau, &edges, 10.0, 12.0, Some(&store), PredictMode::Analytic).unwrap()[0];
        let mc = predict_counts(&p, &tau, &edges, 10.0, 12.0, Some(&store), PredictMode::MonteCarlo { paths: 20_000, seed: 3 })
            .unwrap()[0];
        assert!(warm > cold);
        assert!((mc - warm).abs() / warm < 0.03, "{mc} vs {warm}");
    }
}
