//! One-pass online variational inference over time windows.
//!
//! Each window performs two steps. First, every node's cumulative
//! log-evidence `log_s` absorbs the expected window log-likelihood under the
//! previous responsibilities and parameters, and `tau_ik ∝ π_k exp(log_s_ik)`.
//! Then the parameters take one projected ascent step along the gradient of
//! the expected window log-likelihood under the new responsibilities.
//!
//! Memory is `O(mK + K²H + |store|)`: Poisson models keep per-pair counts and
//! Hawkes models keep only timestamps within the trim radius.

mod schedule;
mod store;

pub use schedule::StepSchedule;
pub use store::{trim_history, HistoryStore};

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EdgeList, Event, LatentState, ModelKind, ModelParams, StepBasis, WindowConfig, DEFAULT_EPS_FLOOR};
use crate::sufficient::{self, PairStats, ParamGradient};
use crate::window::WindowStream;

/// Upper bound kept on Hawkes excitation so fitted models stay subcritical.
pub const MAX_EXCITATION: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    /// Each `tau_i` is a uniformly chosen simplex vertex.
    OneHot,
    /// `tau_ik = 1/K` plus uniform jitter of width `0.01/K`, renormalized.
    SoftJitter,
}

/// Ranges for the random parameter initialization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitRanges {
    pub base: (f64, f64),
    pub excitation: (f64, f64),
    pub decay: f64,
}

impl Default for InitRanges {
    fn default() -> Self {
        Self {
            base: (0.1, 1.0),
            excitation: (0.1, 0.5),
            decay: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineConfig {
    pub kind: ModelKind,
    pub k: usize,
    pub window: WindowConfig,
    pub schedule: StepSchedule,
    pub init: InitMode,
    pub init_ranges: InitRanges,
    pub eps_floor: f64,
    pub freeze_pi: bool,
    /// Hawkes trim radius; `None` means `max(ceil(10 / decay0), dt)`.
    pub trim_radius: Option<f64>,
    /// Required for inhomogeneous models.
    pub basis: Option<StepBasis>,
    /// Keep a `(params, tau)` snapshot every this many windows (0 = never).
    pub snapshot_every: usize,
    /// Largest multiplicative change of any parameter in one window (`None` = unbounded).
    pub step_ratio: Option<f64>,
}

impl OnlineConfig {
    pub fn new(kind: ModelKind, k: usize, window: WindowConfig) -> Self {
        Self {
            kind,
            k,
            window,
            schedule: StepSchedule::default(),
            init: InitMode::OneHot,
            init_ranges: InitRanges::default(),
            eps_floor: DEFAULT_EPS_FLOOR,
            freeze_pi: false,
            trim_radius: None,
            basis: None,
            snapshot_every: 0,
            step_ratio: Some(3.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("K must be at least 1"));
        }
        self.schedule.validate()?;
        if !(self.eps_floor > 0.0) {
            return Err(Error::invalid("epsilon floor must be positive"));
        }
        if self.kind.is_inhomogeneous() && self.basis.is_none() {
            return Err(Error::invalid(format!("model {} needs a basis", self.kind)));
        }
        let (lo, hi) = self.init_ranges.base;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::invalid("baseline init range must be positive and ordered"));
        }
        let (lo, hi) = self.init_ranges.excitation;
        if !(lo >= 0.0 && hi >= lo && hi < 1.0) {
            return Err(Error::invalid("excitation init range must lie in [0, 1)"));
        }
        if !(self.init_ranges.decay > 0.0) {
            return Err(Error::invalid("initial decay must be positive"));
        }
        if let Some(r) = self.step_ratio {
            if !(r > 1.0) {
                return Err(Error::invalid(format!("step ratio must exceed 1, got {r}")));
            }
        }
        if let Some(r) = self.trim_radius {
            if !(r >= self.window.dt) {
                return Err(Error::invalid(format!(
                    "trim radius {r} must be at least the window length {}",
                    self.window.dt
                )));
            }
        }
        Ok(())
    }

    pub fn effective_trim_radius(&self) -> f64 {
        self.trim_radius
            .unwrap_or_else(|| (10.0 / self.init_ranges.decay).ceil().max(self.window.dt))
    }
}

/// Random initial responsibilities and parameters.
pub fn init_state(m: usize, cfg: &OnlineConfig, seed: u64) -> Result<(LatentState, ModelParams)> {
    cfg.validate()?;
    let k = cfg.k;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tau = Array2::zeros((m, k));
    match cfg.init {
        InitMode::OneHot => {
            for i in 0..m {
                tau[[i, rng.gen_range(0..k)]] = 1.0;
            }
        }
        InitMode::SoftJitter => {
            let width = 0.01 / k as f64;
            for i in 0..m {
                let mut row: Vec<f64> = (0..k)
                    .map(|_| 1.0 / k as f64 + rng.gen_range(-width..=width))
                    .collect();
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= s);
                for (c, v) in row.into_iter().enumerate() {
                    tau[[i, c]] = v;
                }
            }
        }
    }
    let state = LatentState {
        tau,
        log_s: Array2::from_elem((m, k), (1.0 / k as f64).ln()),
        pi: Array1::from_elem(k, 1.0 / k as f64),
    };
    let r = cfg.init_ranges;
    let mut draw = |(lo, hi): (f64, f64)| if hi > lo { rng.gen_range(lo..hi) } else { lo };
    let h = cfg.basis.map_or(1, |b| b.n_bins);
    let params = match cfg.kind {
        ModelKind::HomPoisson => ModelParams::HomPoisson {
            rates: Array2::from_shape_simple_fn((k, k), || draw(r.base)),
        },
        ModelKind::InhomPoisson => ModelParams::InhomPoisson {
            coef: Array3::from_shape_simple_fn((k, k, h), || draw(r.base)),
            basis: cfg.basis.expect("validated"),
        },
        ModelKind::HomHawkes => {
            let baseline = Array2::from_shape_simple_fn((k, k), || draw(r.base));
            let excitation = Array2::from_shape_simple_fn((k, k), || draw(r.excitation));
            ModelParams::HomHawkes {
                baseline,
                excitation,
                decay: r.decay,
            }
        }
        ModelKind::InhomHawkes => {
            let coef = Array3::from_shape_simple_fn((k, k, h), || draw(r.base));
            let excitation = Array2::from_shape_simple_fn((k, k), || draw(r.excitation));
            ModelParams::InhomHawkes {
                coef,
                basis: cfg.basis.expect("validated"),
                excitation,
                decay: r.decay,
            }
        }
    };
    Ok((state, params))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub params: ModelParams,
    pub tau: Array2<f64>,
}

/// Diagnostics recorded after each window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowRecord {
    pub window: usize,
    pub n_events: usize,
    pub eta: f64,
    /// Running ELBO divided by the number of events seen so far.
    pub elbo_norm: f64,
    /// Running complete-data log-likelihood under `argmax tau`, per event seen.
    pub loglik_norm: f64,
    pub snapshot: Option<Snapshot>,
}

pub type WindowTrace = Vec<WindowRecord>;

#[derive(Debug, Clone)]
pub struct OnlineFit {
    pub params: ModelParams,
    pub state: LatentState,
    pub trace: WindowTrace,
    pub store: HistoryStore,
}

/// Window-by-window learner holding the constant-size online state.
#[derive(Debug, Clone)]
pub struct OnlineLearner<'a> {
    cfg: OnlineConfig,
    edges: &'a EdgeList,
    state: LatentState,
    params: ModelParams,
    store: HistoryStore,
    next_window: usize,
    seen_events: usize,
    running_expected: f64,
    running_conditional: f64,
    trace: WindowTrace,
}

impl<'a> OnlineLearner<'a> {
    pub fn new(cfg: OnlineConfig, edges: &'a EdgeList, seed: u64) -> Result<Self> {
        let (state, params) = init_state(edges.m(), &cfg, seed)?;
        Self::from_state(cfg, edges, state, params)
    }

    /// Starts from an explicit state, e.g. a relabeled copy of another initialization.
    pub fn from_state(cfg: OnlineConfig, edges: &'a EdgeList, state: LatentState, params: ModelParams) -> Result<Self> {
        cfg.validate()?;
        params.validate()?;
        if params.kind() != cfg.kind || params.n_classes() != cfg.k {
            return Err(Error::invalid("initial parameters do not match the configuration"));
        }
        if state.m() != edges.m() || state.k() != cfg.k {
            return Err(Error::invalid("initial state does not match m and K"));
        }
        let store = if cfg.kind.is_hawkes() {
            HistoryStore::queues(cfg.effective_trim_radius())
        } else {
            HistoryStore::counts()
        };
        Ok(Self {
            cfg,
            edges,
            state,
            params,
            store,
            next_window: 1,
            seen_events: 0,
            running_expected: 0.0,
            running_conditional: 0.0,
            trace: Vec::new(),
        })
    }

    pub fn state(&self) -> &LatentState {
        &self.state
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn store(&self) -> &HistoryStore {
        &self.store
    }

    pub fn trace(&self) -> &WindowTrace {
        &self.trace
    }

    /// Hands over the records collected so far, so long runs can stream them out.
    pub fn take_trace(&mut self) -> WindowTrace {
        std::mem::take(&mut self.trace)
    }

    pub fn config(&self) -> &OnlineConfig {
        &self.cfg
    }

    pub fn next_window(&self) -> usize {
        self.next_window
    }

    /// Bytes held by the learner's state, excluding the trace.
    pub fn state_bytes(&self) -> usize {
        let f = std::mem::size_of::<f64>();
        (self.state.tau.len() + self.state.log_s.len() + self.state.pi.len()) * f
            + self.params.to_flat().len() * f
            + self.store.footprint_bytes()
    }

    fn window_stats(&mut self, events: &[Event], start: f64, end: f64) -> Result<Vec<PairStats>> {
        let mut located = Vec::with_capacity(events.len());
        for e in events {
            if e.t < start || e.t > end {
                return Err(Error::TimeOutOfRange { t: e.t, horizon: end });
            }
            located.push((self.edges.locate(e)?, e.t));
        }
        self.store.absorb(end, events);
        if self.cfg.kind.is_hawkes() {
            let HistoryStore::Queues { queues, .. } = &self.store else {
                unreachable!("hawkes learners keep queues")
            };
            let mut stats = Vec::with_capacity(queues.len());
            let mut buf = Vec::new();
            for (&(s, d), q) in queues {
                let p = self.edges.index_of(s, d).expect("queued pairs come from located events");
                buf.clear();
                buf.extend(q.iter().copied());
                stats.push(PairStats::hawkes(p, &self.params, &buf, start, end));
            }
            Ok(stats)
        } else {
            let mut by_pair: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            for (p, t) in located {
                by_pair.entry(p).or_default().push(t);
            }
            Ok(by_pair
                .into_iter()
                .map(|(p, ts)| PairStats::counts(p, &self.params, &ts))
                .collect())
        }
    }

    /// Processes window `n` (1-based) covering `[start, end]`.
    pub fn process_window(&mut self, n: usize, events: &[Event], start: f64, end: f64) -> Result<&WindowRecord> {
        if n != self.next_window {
            return Err(Error::WindowOrder {
                expected: self.next_window,
                got: n,
            });
        }
        crate::model::check_sorted(events)?;
        let k = self.cfg.k;
        let stats = self.window_stats(events, start, end)?;
        let mut values = Vec::with_capacity(stats.len());
        for st in &stats {
            let mut table = vec![0.0; k * k];
            st.values(&self.params, &mut table);
            values.push(table);
        }
        let comp = sufficient::baseline_compensators(&self.params, start, end);

        // approximation step: evidence under q^(n-1), θ^(n-1)
        let evidence = sufficient::node_evidence(&self.state.tau, self.edges, &stats, &values, &comp);
        self.state.log_s += &evidence;
        update_responsibilities(&mut self.state);
        if !self.cfg.freeze_pi {
            let m = self.state.m() as f64;
            self.state.pi = self.state.tau.sum_axis(ndarray::Axis(0)) / m;
        }

        // diagnostics use the new q and the parameters the window was scored with
        let mass = sufficient::pair_mass(&self.state.tau, self.edges);
        let expected = sufficient::expected_loglik(&self.state.tau, self.edges, &stats, &values, &comp, &mass);
        let z_hat = self.state.z_hat();
        let conditional = hard_loglik(self.edges, &z_hat, &stats, &values, &comp, k);

        // update step
        let grad = sufficient::expected_gradient(&self.params, &self.state.tau, self.edges, &stats, &mass, start, end);
        let eta = self.cfg.schedule.eta(n, events.len(), k, self.cfg.window.horizon);
        let mult = self
            .cfg
            .schedule
            .multiplier(n, events.len(), k, self.cfg.window.horizon, self.edges.len());
        apply_step(&mut self.params, &grad, mult, self.cfg.eps_floor, self.cfg.step_ratio)?;

        self.seen_events += events.len();
        self.running_expected += expected;
        self.running_conditional += conditional;
        let denom = self.seen_events.max(1) as f64;
        let elbo_norm = (self.running_expected + entropy_term(&self.state)) / denom;
        let prior: f64 = z_hat.iter().map(|&c| self.state.pi[c].ln()).sum();
        let loglik_norm = (self.running_conditional + prior) / denom;
        let snapshot = (self.cfg.snapshot_every > 0
            && (n % self.cfg.snapshot_every == 0 || n == self.cfg.window.n_windows))
            .then(|| Snapshot {
                params: self.params.clone(),
                tau: self.state.tau.clone(),
            });
        self.trace.push(WindowRecord {
            window: n,
            n_events: events.len(),
            eta,
            elbo_norm,
            loglik_norm,
            snapshot,
        });
        self.next_window += 1;
        Ok(self.trace.last().expect("just pushed"))
    }

    pub fn finish(self) -> OnlineFit {
        OnlineFit {
            params: self.params,
            state: self.state,
            trace: self.trace,
            store: self.store,
        }
    }
}

/// `tau_ik ∝ π_k exp(log_s_ik)`, evaluated with the row maximum subtracted.
pub(crate) fn update_responsibilities(state: &mut LatentState) {
    let k = state.k();
    let log_pi: Vec<f64> = state.pi.iter().map(|p| p.ln()).collect();
    for (mut row, log_s) in state.tau.rows_mut().into_iter().zip(state.log_s.rows()) {
        let scores: Vec<f64> = (0..k).map(|c| log_pi[c] + log_s[c]).collect();
        let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            row.fill(1.0 / k as f64);
            continue;
        }
        let mut total = 0.0;
        for (c, &s) in scores.iter().enumerate() {
            let v = (s - top).exp();
            row[c] = v;
            total += v;
        }
        row.mapv_inplace(|v| v / total);
    }
}

/// `Σ_i Σ_k τ_ik log(π_k / τ_ik)` with `0 log(π/0) = 0`.
pub fn entropy_term(state: &LatentState) -> f64 {
    let mut s = 0.0;
    for row in state.tau.rows() {
        for (c, &t) in row.iter().enumerate() {
            if t > 0.0 {
                s += t * (state.pi[c].ln() - t.ln());
            }
        }
    }
    s
}

fn hard_loglik(edges: &EdgeList, z: &[usize], stats: &[PairStats], values: &[Vec<f64>], comp: &[f64], k: usize) -> f64 {
    let mut total = 0.0;
    for &(s, d) in edges.pairs() {
        total -= comp[z[s as usize] * k + z[d as usize]];
    }
    for (st, table) in stats.iter().zip(values) {
        let (s, d) = edges.pair(st.pair());
        total += table[z[s as usize] * k + z[d as usize]];
    }
    total
}

/// `θ ← θ + mult · grad`, then projection onto the admissible set.
///
/// With `ratio = Some(r)` each coordinate is also kept within a factor `r`
/// of its current value.
pub(crate) fn apply_step(params: &mut ModelParams, grad: &ParamGradient, mult: f64, eps: f64, ratio: Option<f64>) -> Result<()> {
    let flat = grad.to_flat();
    if flat.iter().any(|g| !g.is_finite()) || !mult.is_finite() {
        return Err(Error::Numeric("non-finite gradient".into()));
    }
    let project = |v: f64, d: f64, lo: f64, hi: f64| {
        let (lo, hi) = match ratio {
            Some(r) => (lo.max(v / r), hi.min(v * r).max(lo)),
            None => (lo, hi),
        };
        (v + mult * d).clamp(lo, hi)
    };
    let k = params.n_classes();
    let h = params.n_bins();
    for a in 0..k {
        for b in 0..k {
            for x in 0..h {
                let v = params.base_mut(a, b, x);
                *v = project(*v, grad.base[[a, b, x]], eps, f64::INFINITY);
            }
        }
    }
    if let (Some(e), Some(g)) = (params.excitation_matrix_mut(), grad.excitation.as_ref()) {
        e.zip_mut_with(g, |v, &d| *v = project(*v, d, eps, MAX_EXCITATION));
    }
    if let (Some(d), Some(g)) = (params.decay_mut(), grad.decay) {
        *d = project(*d, g, eps, f64::INFINITY);
    }
    Ok(())
}

/// Analytic expected window log-likelihood and its gradient for explicit
/// responsibilities, using the full pair history before `start`.
pub fn expected_window_gradient(
    params: &ModelParams,
    tau: &Array2<f64>,
    edges: &EdgeList,
    history: &[Event],
    events: &[Event],
    start: f64,
    end: f64,
) -> Result<(f64, ParamGradient)> {
    let k = params.n_classes();
    let mut by_pair: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let hawkes = params.decay().is_some();
    if hawkes {
        for e in history {
            by_pair.entry(edges.locate(e)?).or_default().push(e.t);
        }
    }
    for e in events {
        by_pair.entry(edges.locate(e)?).or_default().push(e.t);
    }
    let stats: Vec<PairStats> = by_pair
        .into_iter()
        .map(|(p, mut ts)| {
            ts.sort_by(f64::total_cmp);
            if hawkes {
                PairStats::hawkes(p, params, &ts, start, end)
            } else {
                PairStats::counts(p, params, &ts)
            }
        })
        .collect();
    let values: Vec<Vec<f64>> = stats
        .iter()
        .map(|st| {
            let mut t = vec![0.0; k * k];
            st.values(params, &mut t);
            t
        })
        .collect();
    let comp = sufficient::baseline_compensators(params, start, end);
    let mass = sufficient::pair_mass(tau, edges);
    let value = sufficient::expected_loglik(tau, edges, &stats, &values, &comp, &mass);
    let grad = sufficient::expected_gradient(params, tau, edges, &stats, &mass, start, end);
    Ok((value, grad))
}

/// Runs the learner over a fallible, sorted event stream, holding at most one
/// window of events at a time.
pub fn run_online_stream<I, E>(events: I, edges: &EdgeList, cfg: OnlineConfig, seed: u64) -> Result<OnlineFit>
where
    I: IntoIterator<Item = std::result::Result<Event, E>>,
    E: Into<Error>,
{
    let window = cfg.window;
    let mut learner = OnlineLearner::new(cfg, edges, seed)?;
    for w in WindowStream::new(events.into_iter(), window) {
        let w = w?;
        learner.process_window(w.index, &w.events, w.start, w.end)?;
    }
    Ok(learner.finish())
}

/// [`run_online_stream`] over an in-memory slice.
pub fn run_online(events: &[Event], edges: &EdgeList, cfg: OnlineConfig, seed: u64) -> Result<OnlineFit> {
    run_online_stream(events.iter().map(|e| Ok::<_, Error>(*e)), edges, cfg, seed)
}
