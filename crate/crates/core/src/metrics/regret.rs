use crate::error::{Error, Result};
use crate::likelihood::window_loglik;
use crate::model::{EdgeList, Event, ModelParams, WindowConfig};
use crate::window::partition_windows;

/// Per-window loss `-l_n(θ | z) / |A|`, using `params_for(n)` on window `n`.
pub fn window_losses<'p>(
    params_for: impl Fn(usize) -> &'p ModelParams,
    z: &[usize],
    events: &[Event],
    edges: &EdgeList,
    cfg: &WindowConfig,
) -> Result<Vec<f64>> {
    let norm = edges.len() as f64;
    let mut seen = 0;
    let mut out = Vec::with_capacity(cfg.n_windows);
    for w in partition_windows(events, cfg)? {
        let ll = window_loglik(params_for(w.index), z, w.events, edges, w.start, w.end, &events[..seen])?;
        out.push(-ll / norm);
        seen += w.events.len();
    }
    Ok(out)
}

/// Prefix sums of `l̃_n(θ^(n) | z*) - l̃_n(θ* | z*)`.
///
/// `snapshots[n-1]` is the estimate after window `n`, already expressed in
/// the labeling of `z_star`.
pub fn regret_trace(
    snapshots: &[ModelParams],
    theta_star: &ModelParams,
    z_star: &[usize],
    events: &[Event],
    edges: &EdgeList,
    cfg: &WindowConfig,
) -> Result<Vec<f64>> {
    if snapshots.len() != cfg.n_windows {
        return Err(Error::LengthMismatch {
            left: snapshots.len(),
            right: cfg.n_windows,
        });
    }
    let online = window_losses(|n| &snapshots[n - 1], z_star, events, edges, cfg)?;
    let best = window_losses(|_| theta_star, z_star, events, edges, cfg)?;
    let mut acc = 0.0;
    Ok(online
        .iter()
        .zip(&best)
        .map(|(a, b)| {
            acc += a - b;
            acc
        })
        .collect())
}
