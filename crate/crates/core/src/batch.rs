//! Full-data variational EM and a brute-force marginal likelihood for small
//! instances.
//!
//! The E-step sweeps the nodes one at a time, setting each `tau_i` to its
//! exact coordinate-wise optimum given every other row, then sets `π` to the
//! column means. Poisson M-steps are closed form; Hawkes M-steps run a
//! projected, diagonally preconditioned gradient ascent with backtracking.
//! Every step is an ascent step, so the ELBO never decreases.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::pair_loglik_tables;
use crate::model::{EdgeList, Event, LatentState, ModelKind, ModelParams, StepBasis, WindowConfig, DEFAULT_EPS_FLOOR};
use crate::online::{apply_step, entropy_term, init_state, InitMode, InitRanges, OnlineConfig};
use crate::sufficient::{self, PairStats, ParamGradient};

/// Largest number of label configurations the brute-force oracle will enumerate.
pub const BRUTE_FORCE_LIMIT: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchConfig {
    pub kind: ModelKind,
    pub k: usize,
    pub horizon: f64,
    pub max_iters: usize,
    /// Stop once the absolute ELBO change falls below this.
    pub tol: f64,
    /// Coordinate sweeps over the nodes per E-step.
    pub e_sweeps: usize,
    /// Gradient iterations per Hawkes M-step.
    pub m_steps: usize,
    pub init: InitMode,
    pub init_ranges: InitRanges,
    pub eps_floor: f64,
    pub basis: Option<StepBasis>,
}

impl BatchConfig {
    pub fn new(kind: ModelKind, k: usize, horizon: f64, max_iters: usize) -> Self {
        Self {
            kind,
            k,
            horizon,
            max_iters,
            tol: 1e-3,
            e_sweeps: 1,
            m_steps: 10,
            init: InitMode::OneHot,
            init_ranges: InitRanges::default(),
            eps_floor: DEFAULT_EPS_FLOOR,
            basis: None,
        }
    }

    fn as_online(&self) -> Result<OnlineConfig> {
        let mut cfg = OnlineConfig::new(self.kind, self.k, WindowConfig::new(self.horizon, self.horizon)?);
        cfg.init = self.init;
        cfg.init_ranges = self.init_ranges;
        cfg.eps_floor = self.eps_floor;
        cfg.basis = self.basis;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchFitReport {
    pub params: ModelParams,
    pub tau: Array2<f64>,
    pub pi: Array1<f64>,
    pub elbo_trace: Vec<f64>,
    pub iterations: usize,
    pub wall_time: Duration,
}

impl BatchFitReport {
    pub fn z_hat(&self) -> Vec<usize> {
        crate::model::argmax_rows(&self.tau)
    }
}

/// Full-horizon statistics: one entry per pair with at least one event.
struct Data<'a> {
    edges: &'a EdgeList,
    times: BTreeMap<usize, Vec<f64>>,
    horizon: f64,
}

impl<'a> Data<'a> {
    fn new(events: &[Event], edges: &'a EdgeList, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
        }
        crate::model::check_sorted(events)?;
        let mut times: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for e in events {
            if !(e.t >= 0.0 && e.t <= horizon) {
                return Err(Error::TimeOutOfRange { t: e.t, horizon });
            }
            times.entry(edges.locate(e)?).or_default().push(e.t);
        }
        Ok(Self { edges, times, horizon })
    }

    fn stats(&self, params: &ModelParams) -> Vec<PairStats> {
        let hawkes = params.decay().is_some();
        let entries: Vec<(&usize, &Vec<f64>)> = self.times.iter().collect();
        entries
            .par_iter()
            .map(|(&p, ts)| {
                if hawkes {
                    PairStats::hawkes(p, params, ts, 0.0, self.horizon)
                } else {
                    PairStats::counts(p, params, ts)
                }
            })
            .collect()
    }
}

struct Scored {
    stats: Vec<PairStats>,
    values: Vec<Vec<f64>>,
    comp: Vec<f64>,
}

fn score(data: &Data, params: &ModelParams) -> Scored {
    let k = params.n_classes();
    let stats = data.stats(params);
    let values = stats
        .par_iter()
        .map(|st| {
            let mut t = vec![0.0; k * k];
            st.values(params, &mut t);
            t
        })
        .collect();
    let comp = sufficient::baseline_compensators(params, 0.0, data.horizon);
    Scored { stats, values, comp }
}

fn expected_ll(data: &Data, tau: &Array2<f64>, s: &Scored) -> f64 {
    let mass = sufficient::pair_mass(tau, data.edges);
    sufficient::expected_loglik(tau, data.edges, &s.stats, &s.values, &s.comp, &mass)
}

fn state_of(tau: &Array2<f64>, pi: &Array1<f64>) -> LatentState {
    LatentState {
        tau: tau.clone(),
        log_s: Array2::zeros(tau.dim()),
        pi: pi.clone(),
    }
}

fn check_tau(tau: &Array2<f64>, pi: &[f64], m: usize, k: usize) -> Result<()> {
    if tau.dim() != (m, k) {
        return Err(Error::invalid(format!("tau has shape {:?}, expected ({m}, {k})", tau.dim())));
    }
    if pi.len() != k {
        return Err(Error::LengthMismatch { left: pi.len(), right: k });
    }
    for row in tau.rows() {
        let s: f64 = row.sum();
        if row.iter().any(|&v| v < 0.0) || (s - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("tau rows must lie on the simplex"));
        }
    }
    Ok(())
}

/// Evidence lower bound `E_q l(θ | z) + Σ_ik τ_ik log(π_k / τ_ik)` over `[0, horizon]`.
pub fn elbo(
    params: &ModelParams,
    tau: &Array2<f64>,
    pi: &[f64],
    events: &[Event],
    edges: &EdgeList,
    horizon: f64,
) -> Result<f64> {
    params.validate()?;
    check_tau(tau, pi, edges.m(), params.n_classes())?;
    let data = Data::new(events, edges, horizon)?;
    let scored = score(&data, params);
    let pi = Array1::from(pi.to_vec());
    Ok(expected_ll(&data, tau, &scored) + entropy_term(&state_of(tau, &pi)))
}

/// Exact `log Σ_z Π_i π_{z_i} L(θ | z)` by enumerating all `K^m` labelings.
pub fn marginal_loglik_bruteforce(
    params: &ModelParams,
    pi: &[f64],
    events: &[Event],
    edges: &EdgeList,
    horizon: f64,
) -> Result<f64> {
    let k = params.n_classes();
    let m = edges.m();
    if pi.len() != k {
        return Err(Error::LengthMismatch { left: pi.len(), right: k });
    }
    let configs = (k as f64).powi(m as i32);
    if configs > BRUTE_FORCE_LIMIT as f64 {
        return Err(Error::TooLarge {
            configs,
            limit: BRUTE_FORCE_LIMIT as f64,
        });
    }
    let configs = configs as u64;
    params.validate()?;
    Data::new(events, edges, horizon)?;
    let tables = pair_loglik_tables(params, events, edges, horizon)?;
    let log_pi: Vec<f64> = pi.iter().map(|p| p.ln()).collect();
    let logs: Vec<f64> = (0..configs)
        .into_par_iter()
        .map(|code| {
            let mut z = vec![0usize; m];
            let mut c = code;
            for zi in z.iter_mut() {
                *zi = (c % k as u64) as usize;
                c /= k as u64;
            }
            let mut v: f64 = z.iter().map(|&c| log_pi[c]).sum();
            for (p, &(s, d)) in edges.pairs().iter().enumerate() {
                v += tables[p][z[s as usize] * k + z[d as usize]];
            }
            v
        })
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Ok(top);
    }
    Ok(top + logs.iter().map(|v| (v - top).exp()).sum::<f64>().ln())
}

/// One coordinate-ascent sweep over the nodes.
fn e_sweep(data: &Data, s: &Scored, tau: &mut Array2<f64>, pi: &Array1<f64>) {
    let edges = data.edges;
    let k = tau.ncols();
    // pair -> index into the scored statistics
    let mut slot = vec![usize::MAX; edges.len()];
    for (r, st) in s.stats.iter().enumerate() {
        slot[st.pair()] = r;
    }
    let log_pi: Vec<f64> = pi.iter().map(|p| p.ln()).collect();
    let mut score = vec![0.0; k];
    for i in 0..edges.m() {
        score.copy_from_slice(&log_pi);
        for &p in edges.out_pairs(i) {
            let j = edges.pair(p).1 as usize;
            let table = (slot[p] != usize::MAX).then(|| &s.values[slot[p]]);
            for (a, sc) in score.iter_mut().enumerate() {
                for l in 0..k {
                    let v = table.map_or(0.0, |t| t[a * k + l]) - s.comp[a * k + l];
                    *sc += tau[[j, l]] * v;
                }
            }
        }
        for &p in edges.in_pairs(i) {
            let j = edges.pair(p).0 as usize;
            let table = (slot[p] != usize::MAX).then(|| &s.values[slot[p]]);
            for (a, sc) in score.iter_mut().enumerate() {
                for l in 0..k {
                    let v = table.map_or(0.0, |t| t[l * k + a]) - s.comp[l * k + a];
                    *sc += tau[[j, l]] * v;
                }
            }
        }
        let top = score.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (a, &v) in score.iter().enumerate() {
            let e = (v - top).exp();
            tau[[i, a]] = e;
            total += e;
        }
        for a in 0..k {
            tau[[i, a]] /= total;
        }
    }
}

/// Closed-form rate maximizer for the Poisson families.
fn poisson_m_step(data: &Data, params: &mut ModelParams, tau: &Array2<f64>, eps: f64) {
    let k = params.n_classes();
    let h = params.n_bins();
    let mass = sufficient::pair_mass(tau, data.edges);
    let meas = params.bin_measures(0.0, data.horizon);
    let mut num = vec![0.0; k * k * h];
    for (&p, ts) in &data.times {
        let (s, d) = data.edges.pair(p);
        let mut counts = vec![0.0; h];
        for &t in ts {
            counts[params.bin_of(t)] += 1.0;
        }
        for a in 0..k {
            for b in 0..k {
                let w = tau[[s as usize, a]] * tau[[d as usize, b]];
                for (x, &c) in counts.iter().enumerate() {
                    num[(a * k + b) * h + x] += w * c;
                }
            }
        }
    }
    for a in 0..k {
        for b in 0..k {
            for x in 0..h {
                let den = mass[a * k + b] * meas[x];
                if den > 0.0 {
                    *params.base_mut(a, b, x) = (num[(a * k + b) * h + x] / den).max(eps);
                }
            }
        }
    }
}

/// Projected gradient ascent on `E_q l(θ | z)` for the Hawkes families.
///
/// Each coordinate's step is scaled by `θ² / n`, where `n` is the expected
/// number of events the coordinate governs (a Poisson-Newton scale), and the
/// step length is halved until the objective does not decrease.
fn hawkes_m_step(data: &Data, params: &mut ModelParams, tau: &Array2<f64>, iters: usize, eps: f64) -> Result<f64> {
    let k = params.n_classes();
    let h = params.n_bins();
    let mass = sufficient::pair_mass(tau, data.edges);
    // expected events per block and bin
    let mut n_block = vec![0.0; k * k * h];
    let mut n_total = 0.0;
    for (&p, ts) in &data.times {
        let (s, d) = data.edges.pair(p);
        for &t in ts {
            let x = params.bin_of(t);
            for a in 0..k {
                for b in 0..k {
                    n_block[(a * k + b) * h + x] += tau[[s as usize, a]] * tau[[d as usize, b]];
                }
            }
        }
        n_total += ts.len() as f64;
    }
    let mut scored = score(data, params);
    let mut current = expected_ll(data, tau, &scored);
    for _ in 0..iters {
        let mut dir = sufficient::expected_gradient(params, tau, data.edges, &scored.stats, &mass, 0.0, data.horizon);
        for a in 0..k {
            for b in 0..k {
                let mut block = 0.0;
                for x in 0..h {
                    let n = n_block[(a * k + b) * h + x].max(1.0);
                    block += n_block[(a * k + b) * h + x];
                    let th = params.base(a, b, x);
                    dir.base[[a, b, x]] *= th * th / n;
                }
                if let Some(e) = dir.excitation.as_mut() {
                    let th = params.excitation(a, b);
                    e[[a, b]] *= th * th / block.max(1.0);
                }
            }
        }
        if let Some(d) = dir.decay.as_mut() {
            let th = params.decay().expect("hawkes");
            *d *= th * th / n_total.max(1.0);
        }
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let mut trial = params.clone();
            apply_step(&mut trial, &dir, step, eps, None)?;
            let trial_scored = score(data, &trial);
            let value = expected_ll(data, tau, &trial_scored);
            if value.is_finite() && value >= current {
                let gain = value - current;
                *params = trial;
                scored = trial_scored;
                current = value;
                accepted = gain > 0.0;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(current)
}

/// Variational EM on the full event set; returns at convergence or after `max_iters`.
pub fn batch_fit(events: &[Event], edges: &EdgeList, cfg: &BatchConfig, seed: u64) -> Result<BatchFitReport> {
    let clock = Instant::now();
    if cfg.max_iters == 0 {
        return Err(Error::invalid("max_iters must be at least 1"));
    }
    if !(cfg.tol >= 0.0) {
        return Err(Error::invalid("tolerance must be non-negative"));
    }
    let (state, mut params) = init_state(edges.m(), &cfg.as_online()?, seed)?;
    let data = Data::new(events, edges, cfg.horizon)?;
    let mut tau = state.tau;
    let mut pi = state.pi;
    let k = cfg.k;
    let mut trace = Vec::new();
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        if params.decay().is_some() {
            hawkes_m_step(&data, &mut params, &tau, cfg.m_steps, cfg.eps_floor)?;
        } else {
            poisson_m_step(&data, &mut params, &tau, cfg.eps_floor);
        }
        let scored = score(&data, &params);
        for _ in 0..cfg.e_sweeps.max(1) {
            e_sweep(&data, &scored, &mut tau, &pi);
            let mut next = tau.sum_axis(ndarray::Axis(0)) / edges.m().max(1) as f64;
            // keep every class reachable so log π stays finite
            next.mapv_inplace(|v| v.max(1e-300));
            let s = next.sum();
            pi = next / s;
        }
        let value = expected_ll(&data, &tau, &score(&data, &params)) + entropy_term(&state_of(&tau, &pi));
        if !value.is_finite() {
            return Err(Error::Numeric(format!("ELBO became {value} at iteration {iterations}")));
        }
        let done = trace.last().is_some_and(|&prev: &f64| (value - prev).abs() < cfg.tol);
        trace.push(value);
        if done {
            break;
        }
    }
    debug_assert_eq!(tau.ncols(), k);
    Ok(BatchFitReport {
        params,
        tau,
        pi,
        elbo_trace: trace,
        iterations,
        wall_time: clock.elapsed(),
    })
}

/// `E_q l(θ | z)` over the full horizon and its gradient.
pub fn expected_loglik_gradient(
    params: &ModelParams,
    tau: &Array2<f64>,
    events: &[Event],
    edges: &EdgeList,
    horizon: f64,
) -> Result<(f64, ParamGradient)> {
    let data = Data::new(events, edges, horizon)?;
    let scored = score(&data, params);
    let mass = sufficient::pair_mass(tau, edges);
    let value = sufficient::expected_loglik(tau, edges, &scored.stats, &scored.values, &scored.comp, &mass);
    let grad = sufficient::expected_gradient(params, tau, edges, &scored.stats, &mass, 0.0, horizon);
    Ok((value, grad))
}
