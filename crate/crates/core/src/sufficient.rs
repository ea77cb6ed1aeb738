//! Per-pair sufficient statistics for one window and the expected window
//! log-likelihood and gradient built from them.
//!
//! For an exponential kernel the excitation at an event,
//! `x(t) = Σ_{s<t} λ e^{-λ(t-s)}`, and its derivative in `λ` are carried by an
//! O(1) recursion, so a pair's window costs O(events) rather than O(events²).
//! The excitation part of the compensator reduces to
//! `b · G` with `G = Σ_s [e^{-λ(max(S,s)-s)} - e^{-λ(E-s)}]`.
//!
//! Gradients on a window `[S, E]`, for a pair in blocks `(k, l)` with intensity
//! `λ_kl(t) = μ_kl(t) + b_kl x(t)`, where `μ_kl(t) = Σ_h a_kl(h) f_h(t)`
//! (one bin for the homogeneous families):
//!
//! * `∂/∂a_kl(h) = Σ_{t: bin(t)=h} 1/λ_kl(t) - |[S,E] ∩ bin h|`
//! * `∂/∂b_kl = Σ_t x(t)/λ_kl(t) - G`
//! * `∂/∂λ = Σ_t b_kl x'(t)/λ_kl(t) - b_kl G'`, with `x' = dx/dλ`, `G' = dG/dλ`
//!
//! The inhomogeneous Hawkes case replaces the constant `μ_kl` of the
//! homogeneous one by the step function above; only the baseline row changes.
//! The expected gradient weights each pair's terms by `τ_ik τ_jl`.

use ndarray::{Array2, Array3};

use crate::model::ModelParams;

/// One pair's contribution to a window, independent of class labels.
#[derive(Debug, Clone)]
pub(crate) enum PairStats {
    /// Poisson families: event counts per basis bin.
    Counts { pair: usize, counts: Vec<f64> },
    /// Hawkes families: per-event `(bin, x, dx/dλ)` plus the compensator kernel mass.
    Hawkes {
        pair: usize,
        events: Vec<(usize, f64, f64)>,
        kernel_mass: f64,
        kernel_mass_dlambda: f64,
    },
}

impl PairStats {
    pub(crate) fn pair(&self) -> usize {
        match self {
            PairStats::Counts { pair, .. } | PairStats::Hawkes { pair, .. } => *pair,
        }
    }

    pub(crate) fn counts(pair: usize, params: &ModelParams, times: &[f64]) -> Self {
        let mut counts = vec![0.0; params.n_bins()];
        for &t in times {
            counts[params.bin_of(t)] += 1.0;
        }
        PairStats::Counts { pair, counts }
    }

    /// Builds Hawkes statistics from a pair's sorted times.
    ///
    /// Times `< start` are history; times in `[start, end]` are window events.
    /// Simultaneous events do not excite each other.
    pub(crate) fn hawkes(pair: usize, params: &ModelParams, times: &[f64], start: f64, end: f64) -> Self {
        let decay = params.decay().expect("hawkes statistics need a decay");
        // a = Σ e^{-λ(t-s)}, c = Σ (t-s) e^{-λ(t-s)} over folded events, valid at time `at`
        let (mut a, mut c) = (0.0f64, 0.0f64);
        let mut at = f64::NEG_INFINITY;
        let mut pending = 0.0;
        let mut events = Vec::new();
        let mut mass = 0.0;
        let mut mass_d = 0.0;
        for &t in times {
            if t > at {
                a += pending;
                pending = 0.0;
                if at.is_finite() {
                    let gap = t - at;
                    let f = (-decay * gap).exp();
                    c = f * (c + gap * a);
                    a *= f;
                }
                at = t;
            }
            if t >= start {
                let x = decay * a;
                let dx = a - decay * c;
                events.push((params.bin_of(t), x, dx));
            }
            pending += 1.0;
            // kernel mass launched by this event over the window
            if t < end {
                let from = start.max(t);
                let e_from = (-decay * (from - t)).exp();
                let e_end = (-decay * (end - t)).exp();
                mass += e_from - e_end;
                mass_d += -(from - t) * e_from + (end - t) * e_end;
            }
        }
        PairStats::Hawkes {
            pair,
            events,
            kernel_mass: mass,
            kernel_mass_dlambda: mass_d,
        }
    }

    /// Writes the label-dependent part of the window log-likelihood into
    /// `out[k*K + l]`: `Σ_events log λ_kl(t) - b_kl G`. The baseline
    /// compensator is shared by all pairs and handled separately.
    pub(crate) fn values(&self, params: &ModelParams, out: &mut [f64]) {
        let k = params.n_classes();
        match self {
            PairStats::Counts { counts, .. } => {
                for a in 0..k {
                    for b in 0..k {
                        let mut v = 0.0;
                        for (h, &c) in counts.iter().enumerate() {
                            if c > 0.0 {
                                v += c * params.base(a, b, h).ln();
                            }
                        }
                        out[a * k + b] = v;
                    }
                }
            }
            PairStats::Hawkes {
                events, kernel_mass, ..
            } => {
                for a in 0..k {
                    for b in 0..k {
                        let exc = params.excitation(a, b);
                        let mut v = -exc * kernel_mass;
                        for &(h, x, _) in events {
                            v += (params.base(a, b, h) + exc * x).ln();
                        }
                        out[a * k + b] = v;
                    }
                }
            }
        }
    }

    /// Adds `Σ_kl w_kl ∇ [label-dependent part]` into `grad`.
    pub(crate) fn add_gradient(&self, params: &ModelParams, weights: &[f64], grad: &mut ParamGradient) {
        let k = params.n_classes();
        match self {
            PairStats::Counts { counts, .. } => {
                for a in 0..k {
                    for b in 0..k {
                        let w = weights[a * k + b];
                        if w == 0.0 {
                            continue;
                        }
                        for (h, &c) in counts.iter().enumerate() {
                            if c > 0.0 {
                                grad.base[[a, b, h]] += w * c / params.base(a, b, h);
                            }
                        }
                    }
                }
            }
            PairStats::Hawkes {
                events,
                kernel_mass,
                kernel_mass_dlambda,
                ..
            } => {
                let mut d_decay = 0.0;
                for a in 0..k {
                    for b in 0..k {
                        let w = weights[a * k + b];
                        if w == 0.0 {
                            continue;
                        }
                        let exc = params.excitation(a, b);
                        let mut g_exc = -kernel_mass;
                        let mut g_dec = -exc * kernel_mass_dlambda;
                        for &(h, x, dx) in events {
                            let inv = 1.0 / (params.base(a, b, h) + exc * x);
                            grad.base[[a, b, h]] += w * inv;
                            g_exc += x * inv;
                            g_dec += exc * dx * inv;
                        }
                        if let Some(e) = grad.excitation.as_mut() {
                            e[[a, b]] += w * g_exc;
                        }
                        d_decay += w * g_dec;
                    }
                }
                if let Some(d) = grad.decay.as_mut() {
                    *d += d_decay;
                }
            }
        }
    }
}

/// Gradient of an expected log-likelihood with respect to every model parameter.
///
/// `base` is indexed `(k, l, h)`; homogeneous families use `h = 0` only.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradient {
    pub base: Array3<f64>,
    pub excitation: Option<Array2<f64>>,
    pub decay: Option<f64>,
}

impl ParamGradient {
    pub fn zeros(params: &ModelParams) -> Self {
        let k = params.n_classes();
        let hawkes = params.decay().is_some();
        Self {
            base: Array3::zeros((k, k, params.n_bins())),
            excitation: hawkes.then(|| Array2::zeros((k, k))),
            decay: hawkes.then_some(0.0),
        }
    }

    /// Flattened in the same order as [`ModelParams::to_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.base.iter().copied().collect();
        if let Some(e) = &self.excitation {
            v.extend(e.iter().copied());
        }
        if let Some(d) = self.decay {
            v.push(d);
        }
        v
    }

    pub fn scale(&mut self, s: f64) {
        self.base.mapv_inplace(|x| x * s);
        if let Some(e) = self.excitation.as_mut() {
            e.mapv_inplace(|x| x * s);
        }
        if let Some(d) = self.decay.as_mut() {
            *d *= s;
        }
    }
}

/// Block-level mass `Σ_{(i,j)∈A} τ_ik τ_jl`, row-major K×K.
pub(crate) fn pair_mass(tau: &Array2<f64>, edges: &crate::model::EdgeList) -> Vec<f64> {
    let k = tau.ncols();
    let mut mass = vec![0.0; k * k];
    let mut out_sum = vec![0.0; k];
    for i in 0..edges.m() {
        let outs = edges.out_pairs(i);
        if outs.is_empty() {
            continue;
        }
        out_sum.iter_mut().for_each(|v| *v = 0.0);
        for &p in outs {
            let j = edges.pair(p).1 as usize;
            for l in 0..k {
                out_sum[l] += tau[[j, l]];
            }
        }
        for a in 0..k {
            let ta = tau[[i, a]];
            for l in 0..k {
                mass[a * k + l] += ta * out_sum[l];
            }
        }
    }
    mass
}

/// Baseline compensator per block on `[start, end]`, row-major K×K.
pub(crate) fn baseline_compensators(params: &ModelParams, start: f64, end: f64) -> Vec<f64> {
    let k = params.n_classes();
    let meas = params.bin_measures(start, end);
    let mut out = vec![0.0; k * k];
    for a in 0..k {
        for b in 0..k {
            out[a * k + b] = meas.iter().enumerate().map(|(h, w)| w * params.base(a, b, h)).sum();
        }
    }
    out
}

/// Adds `-meas_h · mass_kl` to the baseline gradient.
pub(crate) fn add_compensator_gradient(params: &ModelParams, mass: &[f64], start: f64, end: f64, grad: &mut ParamGradient) {
    let k = params.n_classes();
    let meas = params.bin_measures(start, end);
    for a in 0..k {
        for b in 0..k {
            for (h, w) in meas.iter().enumerate() {
                grad.base[[a, b, h]] -= w * mass[a * k + b];
            }
        }
    }
}

/// Per-node evidence `E_{q(z_-i)} [l(z_i = k, z_-i)]` up to terms free of `z_i`,
/// written into an m×K array.
///
/// `values[r]` is the label-dependent table of `stats[r]`; every pair also
/// pays the shared baseline compensator `comp`.
pub(crate) fn node_evidence(
    tau: &Array2<f64>,
    edges: &crate::model::EdgeList,
    stats: &[PairStats],
    values: &[Vec<f64>],
    comp: &[f64],
) -> Array2<f64> {
    let (m, k) = tau.dim();
    let mut ev = Array2::zeros((m, k));
    let mut out_sum = vec![0.0; k];
    let mut in_sum = vec![0.0; k];
    for i in 0..m {
        out_sum.iter_mut().for_each(|v| *v = 0.0);
        in_sum.iter_mut().for_each(|v| *v = 0.0);
        for &p in edges.out_pairs(i) {
            let j = edges.pair(p).1 as usize;
            for l in 0..k {
                out_sum[l] += tau[[j, l]];
            }
        }
        for &p in edges.in_pairs(i) {
            let j = edges.pair(p).0 as usize;
            for l in 0..k {
                in_sum[l] += tau[[j, l]];
            }
        }
        for a in 0..k {
            let mut v = 0.0;
            for l in 0..k {
                v -= out_sum[l] * comp[a * k + l] + in_sum[l] * comp[l * k + a];
            }
            ev[[i, a]] = v;
        }
    }
    for (st, table) in stats.iter().zip(values) {
        let (s, d) = edges.pair(st.pair());
        let (s, d) = (s as usize, d as usize);
        for a in 0..k {
            let mut to_src = 0.0;
            let mut to_dst = 0.0;
            for l in 0..k {
                to_src += tau[[d, l]] * table[a * k + l];
                to_dst += tau[[s, l]] * table[l * k + a];
            }
            ev[[s, a]] += to_src;
            ev[[d, a]] += to_dst;
        }
    }
    ev
}

/// `E_q l(θ | z)` from the same ingredients as [`node_evidence`].
pub(crate) fn expected_loglik(
    tau: &Array2<f64>,
    edges: &crate::model::EdgeList,
    stats: &[PairStats],
    values: &[Vec<f64>],
    comp: &[f64],
    mass: &[f64],
) -> f64 {
    let k = tau.ncols();
    let mut total: f64 = -mass.iter().zip(comp).map(|(m, c)| m * c).sum::<f64>();
    for (st, table) in stats.iter().zip(values) {
        let (s, d) = edges.pair(st.pair());
        for a in 0..k {
            for b in 0..k {
                total += tau[[s as usize, a]] * tau[[d as usize, b]] * table[a * k + b];
            }
        }
    }
    total
}

/// Gradient of `E_q l(θ | z)` for the given statistics.
pub(crate) fn expected_gradient(
    params: &ModelParams,
    tau: &Array2<f64>,
    edges: &crate::model::EdgeList,
    stats: &[PairStats],
    mass: &[f64],
    start: f64,
    end: f64,
) -> ParamGradient {
    let k = params.n_classes();
    let mut grad = ParamGradient::zeros(params);
    add_compensator_gradient(params, mass, start, end, &mut grad);
    let mut w = vec![0.0; k * k];
    for st in stats {
        let (s, d) = edges.pair(st.pair());
        for a in 0..k {
            for b in 0..k {
                w[a * k + b] = tau[[s as usize, a]] * tau[[d as usize, b]];
            }
        }
        st.add_gradient(params, &w, &mut grad);
    }
    grad
}
