//! Direct evaluation of block point-process log-likelihoods.
//!
//! Everything here evaluates intensities point by point from the raw event
//! history, with no recursion and no truncation. The online and batch
//! estimators use the sufficient-statistic route in [`crate::sufficient`];
//! this module is the reference it is tested against.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::{intensity, EdgeList, Event, ModelParams};

/// `∫_start^end` of the excitation kernel `λ e^{-λ(u-s)}` launched at `s`,
/// restricted to `u > s`.
pub fn kernel_integral(decay: f64, s: f64, start: f64, end: f64) -> f64 {
    if s >= end {
        return 0.0;
    }
    let from = start.max(s);
    (-decay * (from - s)).exp() - (-decay * (end - s)).exp()
}

/// Conditional log-likelihood of one pair's events on `[start, end]` under block `(k, l)`.
///
/// `history` holds the pair's event times before `start`; `events` the times
/// inside the window. Both must be sorted.
pub fn pair_window_loglik(
    params: &ModelParams,
    k: usize,
    l: usize,
    history: &[f64],
    events: &[f64],
    start: f64,
    end: f64,
) -> Result<f64> {
    let mut past: Vec<f64> = history.to_vec();
    let mut ll = 0.0;
    for &t in events {
        let rate = intensity(params, k, l, t, &past)?;
        if !(rate > 0.0) {
            return Err(Error::Numeric(format!("intensity {rate} at t={t} for block ({k},{l})")));
        }
        ll += rate.ln();
        past.push(t);
    }
    ll -= compensator(params, k, l, &past, start, end);
    Ok(ll)
}

/// `∫_start^end λ_kl(u) du` given every event time of the pair before `end`.
pub fn compensator(params: &ModelParams, k: usize, l: usize, times: &[f64], start: f64, end: f64) -> f64 {
    let mut total = params.baseline_integral(k, l, start, end);
    if let Some(decay) = params.decay() {
        let b = params.excitation(k, l);
        total += b * times.iter().map(|&s| kernel_integral(decay, s, start, end)).sum::<f64>();
    }
    total
}

fn group_by_pair(events: &[Event], edges: &EdgeList) -> Result<HashMap<usize, Vec<f64>>> {
    let mut map: HashMap<usize, Vec<f64>> = HashMap::new();
    for e in events {
        map.entry(edges.locate(e)?).or_default().push(e.t);
    }
    Ok(map)
}

fn check_assignment(z: &[usize], edges: &EdgeList, k: usize) -> Result<()> {
    if z.len() != edges.m() {
        return Err(Error::LengthMismatch {
            left: z.len(),
            right: edges.m(),
        });
    }
    if let Some(&bad) = z.iter().find(|&&c| c >= k) {
        return Err(Error::invalid(format!("class {bad} out of range for K={k}")));
    }
    Ok(())
}

/// Unnormalized conditional log-likelihood of the window `[start, end]` given
/// hard assignment `z` (0-based classes), summed over every pair of `edges`.
///
/// `history` carries events before `start` (needed for Hawkes excitation
/// carried into the window); Poisson models ignore it.
pub fn window_loglik(
    params: &ModelParams,
    z: &[usize],
    events: &[Event],
    edges: &EdgeList,
    start: f64,
    end: f64,
    history: &[Event],
) -> Result<f64> {
    check_assignment(z, edges, params.n_classes())?;
    let inside = group_by_pair(events, edges)?;
    let before = if params.decay().is_some() {
        group_by_pair(history, edges)?
    } else {
        HashMap::new()
    };
    let empty: Vec<f64> = Vec::new();
    let mut total = 0.0;
    for (p, &(s, d)) in edges.pairs().iter().enumerate() {
        let (k, l) = (z[s as usize], z[d as usize]);
        let ev = inside.get(&p).unwrap_or(&empty);
        let hist = before.get(&p).unwrap_or(&empty);
        if ev.is_empty() && hist.is_empty() {
            total -= params.baseline_integral(k, l, start, end);
        } else {
            total += pair_window_loglik(params, k, l, hist, ev, start, end)?;
        }
    }
    Ok(total)
}

/// Conditional log-likelihood `l(θ | z)` over `[0, horizon]`.
pub fn conditional_loglik(
    params: &ModelParams,
    z: &[usize],
    events: &[Event],
    edges: &EdgeList,
    horizon: f64,
) -> Result<f64> {
    window_loglik(params, z, events, edges, 0.0, horizon, &[])
}

/// Complete-data log-likelihood `Σ_i log π_{z_i} + l(θ | z)`.
pub fn complete_loglik(
    params: &ModelParams,
    pi: &[f64],
    z: &[usize],
    events: &[Event],
    edges: &EdgeList,
    horizon: f64,
) -> Result<f64> {
    let prior: f64 = z.iter().map(|&c| pi[c].ln()).sum();
    Ok(prior + conditional_loglik(params, z, events, edges, horizon)?)
}

/// Per-pair log-likelihood table `L_p(k, l)` over `[0, horizon]`, computed directly.
///
/// Entry `p` is a row-major K×K table for pair `p` of `edges`.
pub fn pair_loglik_tables(
    params: &ModelParams,
    events: &[Event],
    edges: &EdgeList,
    horizon: f64,
) -> Result<Vec<Vec<f64>>> {
    let k = params.n_classes();
    let grouped = group_by_pair(events, edges)?;
    let empty: Vec<f64> = Vec::new();
    (0..edges.len())
        .map(|p| {
            let ev = grouped.get(&p).unwrap_or(&empty);
            let mut table = Vec::with_capacity(k * k);
            for a in 0..k {
                for b in 0..k {
                    table.push(pair_window_loglik(params, a, b, &[], ev, 0.0, horizon)?);
                }
            }
            Ok(table)
        })
        .collect()
}
