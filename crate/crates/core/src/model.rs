//! Domain types shared by every stage: events, the edge list, window
//! configuration, the four block intensity families and the variational state.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound applied to every rate parameter after a gradient step.
pub const DEFAULT_EPS_FLOOR: f64 = 1e-6;

/// One directed, timestamped interaction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub src: u32,
    pub dst: u32,
    pub t: f64,
}

impl Event {
    pub fn new(src: u32, dst: u32, t: f64) -> Self {
        Self { src, dst, t }
    }

    pub fn pair(&self) -> (u32, u32) {
        (self.src, self.dst)
    }
}

/// Returns the position of the first event whose time is smaller than its predecessor's.
pub fn check_sorted(events: &[Event]) -> Result<()> {
    for (pos, w) in events.windows(2).enumerate() {
        if w[1].t < w[0].t || w[1].t.is_nan() {
            return Err(Error::Unsorted {
                position: pos + 1,
                t: w[1].t,
                previous: w[0].t,
            });
        }
    }
    Ok(())
}

/// The set of directed node pairs that carry a point process.
///
/// Pairs are stored sorted; `out_pairs(i)` and `in_pairs(i)` give the indices of
/// pairs leaving and entering node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeList {
    m: usize,
    pairs: Vec<(u32, u32)>,
    index: HashMap<(u32, u32), usize>,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
}

impl EdgeList {
    pub fn new(m: usize, pairs: impl IntoIterator<Item = (u32, u32)>) -> Result<Self> {
        let mut pairs: Vec<(u32, u32)> = pairs.into_iter().collect();
        for &(s, d) in &pairs {
            if s == d {
                return Err(Error::SelfPair(s));
            }
            for id in [s, d] {
                if id as usize >= m {
                    return Err(Error::NodeOutOfRange { id, m });
                }
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        let mut index = HashMap::with_capacity(pairs.len());
        let mut out_adj = vec![Vec::new(); m];
        let mut in_adj = vec![Vec::new(); m];
        for (p, &(s, d)) in pairs.iter().enumerate() {
            index.insert((s, d), p);
            out_adj[s as usize].push(p);
            in_adj[d as usize].push(p);
        }
        Ok(Self {
            m,
            pairs,
            index,
            out_adj,
            in_adj,
        })
    }

    /// Distinct pairs observed in `events`; `m` is one more than the largest id.
    pub fn from_events<'a>(events: impl IntoIterator<Item = &'a Event>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        let mut max_id = None::<u32>;
        for e in events {
            seen.insert(e.pair());
            let hi = e.src.max(e.dst);
            max_id = Some(max_id.map_or(hi, |m| m.max(hi)));
        }
        let m = match max_id {
            Some(id) => id as usize + 1,
            None => return Err(Error::invalid("cannot derive an edge list from no events")),
        };
        Self::new(m, seen)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    pub fn pair(&self, p: usize) -> (u32, u32) {
        self.pairs[p]
    }

    pub fn index_of(&self, src: u32, dst: u32) -> Option<usize> {
        self.index.get(&(src, dst)).copied()
    }

    pub fn contains(&self, src: u32, dst: u32) -> bool {
        self.index.contains_key(&(src, dst))
    }

    pub fn out_pairs(&self, node: usize) -> &[usize] {
        &self.out_adj[node]
    }

    pub fn in_pairs(&self, node: usize) -> &[usize] {
        &self.in_adj[node]
    }

    pub fn out_degree(&self, node: usize) -> usize {
        self.out_adj[node].len()
    }

    /// Pair index of an event, or an error naming the offending event.
    pub fn locate(&self, e: &Event) -> Result<usize> {
        self.index_of(e.src, e.dst).ok_or(Error::PairNotInEdgeList {
            src: e.src,
            dst: e.dst,
            t: e.t,
        })
    }
}

/// Partition of `[0, horizon]` into windows of length `dt`.
///
/// Window `n` (1-based) covers `[(n-1)dt, n dt)`; the final window is closed on
/// the right and may be shorter than `dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub dt: f64,
    pub horizon: f64,
    pub n_windows: usize,
}

impl WindowConfig {
    pub fn new(dt: f64, horizon: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("window length must be positive, got {dt}")));
        }
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(Error::invalid(format!("horizon must be nonnegative, got {horizon}")));
        }
        let ratio = horizon / dt;
        // absorb floating noise such as 500/5 = 100.00000000000001
        let n = if (ratio - ratio.round()).abs() < 1e-9 {
            ratio.round()
        } else {
            ratio.ceil()
        };
        Ok(Self {
            dt,
            horizon,
            n_windows: (n as usize).max(1),
        })
    }

    /// Start and end of window `n` (1-based).
    pub fn bounds(&self, n: usize) -> (f64, f64) {
        let start = (n - 1) as f64 * self.dt;
        let end = if n >= self.n_windows {
            self.horizon
        } else {
            (n as f64 * self.dt).min(self.horizon)
        };
        (start, end)
    }

    /// 1-based window index that owns time `t`.
    pub fn window_of(&self, t: f64) -> usize {
        let n = (t / self.dt).floor() as usize + 1;
        n.clamp(1, self.n_windows)
    }
}

/// Step-function basis: `f_h(t) = 1{floor(t / period) mod H = h}`.
///
/// Exactly one function is active at any time, so the family is a partition of unity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepBasis {
    pub n_bins: usize,
    pub period: f64,
}

impl StepBasis {
    pub fn new(n_bins: usize, period: f64) -> Result<Self> {
        if n_bins == 0 {
            return Err(Error::invalid("basis needs at least one function"));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::invalid(format!("basis period must be positive, got {period}")));
        }
        Ok(Self { n_bins, period })
    }

    /// Day-of-week basis for timestamps measured in seconds.
    pub fn day_of_week_seconds() -> Self {
        Self {
            n_bins: 7,
            period: 86_400.0,
        }
    }

    /// Index of the active function at time `t`.
    pub fn bin(&self, t: f64) -> usize {
        let slot = (t / self.period).floor();
        (slot.rem_euclid(self.n_bins as f64)) as usize % self.n_bins
    }

    /// `(f_1(t), ..., f_H(t))`.
    pub fn evaluate(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n_bins];
        out[self.bin(t)] = 1.0;
        out
    }

    /// Lebesgue measure of `[0, x] ∩ {t : bin(t) = h}` for `x >= 0`.
    fn cumulative(&self, x: f64, h: usize) -> f64 {
        let cycle = self.period * self.n_bins as f64;
        let full = (x / cycle).floor();
        let rem = x - full * cycle;
        full * self.period + (rem - h as f64 * self.period).clamp(0.0, self.period)
    }

    /// `∫_a^b f_h(t) dt` for every `h`.
    pub fn integrals(&self, a: f64, b: f64) -> Vec<f64> {
        (0..self.n_bins)
            .map(|h| (self.cumulative(b.max(0.0), h) - self.cumulative(a.max(0.0), h)).max(0.0))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    HomPoisson,
    InhomPoisson,
    HomHawkes,
    InhomHawkes,
}

impl ModelKind {
    pub fn is_hawkes(self) -> bool {
        matches!(self, ModelKind::HomHawkes | ModelKind::InhomHawkes)
    }

    pub fn is_inhomogeneous(self) -> bool {
        matches!(self, ModelKind::InhomPoisson | ModelKind::InhomHawkes)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::HomPoisson => "hom-poisson",
            ModelKind::InhomPoisson => "inhom-poisson",
            ModelKind::HomHawkes => "hom-hawkes",
            ModelKind::InhomHawkes => "inhom-hawkes",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hom-poisson" => Ok(ModelKind::HomPoisson),
            "inhom-poisson" => Ok(ModelKind::InhomPoisson),
            "hom-hawkes" => Ok(ModelKind::HomHawkes),
            "inhom-hawkes" => Ok(ModelKind::InhomHawkes),
            other => Err(Error::invalid(format!("unknown model '{other}'"))),
        }
    }
}

/// Parameters of a block point-process model with `K` classes.
///
/// Homogeneous families are stored with their natural shapes; the accessors
/// below expose every family through one view: a baseline `base(k, l, h)` over
/// `H` bins (`H = 1` when homogeneous), an excitation `b_kl` (zero for
/// Poisson) and an exponential decay rate (Hawkes only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ParamsRepr", try_from = "ParamsRepr")]
pub enum ModelParams {
    HomPoisson {
        rates: Array2<f64>,
    },
    InhomPoisson {
        coef: Array3<f64>,
        basis: StepBasis,
    },
    HomHawkes {
        baseline: Array2<f64>,
        excitation: Array2<f64>,
        decay: f64,
    },
    InhomHawkes {
        coef: Array3<f64>,
        basis: StepBasis,
        excitation: Array2<f64>,
        decay: f64,
    },
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::HomPoisson { .. } => ModelKind::HomPoisson,
            ModelParams::InhomPoisson { .. } => ModelKind::InhomPoisson,
            ModelParams::HomHawkes { .. } => ModelKind::HomHawkes,
            ModelParams::InhomHawkes { .. } => ModelKind::InhomHawkes,
        }
    }

    pub fn n_classes(&self) -> usize {
        match self {
            ModelParams::HomPoisson { rates } => rates.nrows(),
            ModelParams::InhomPoisson { coef, .. } => coef.dim().0,
            ModelParams::HomHawkes { baseline, .. } => baseline.nrows(),
            ModelParams::InhomHawkes { coef, .. } => coef.dim().0,
        }
    }

    pub fn basis(&self) -> Option<&StepBasis> {
        match self {
            ModelParams::InhomPoisson { basis, .. } | ModelParams::InhomHawkes { basis, .. } => {
                Some(basis)
            }
            _ => None,
        }
    }

    pub fn n_bins(&self) -> usize {
        self.basis().map_or(1, |b| b.n_bins)
    }

    pub fn bin_of(&self, t: f64) -> usize {
        self.basis().map_or(0, |b| b.bin(t))
    }

    /// Baseline coefficient of block `(k, l)` on bin `h`.
    pub fn base(&self, k: usize, l: usize, h: usize) -> f64 {
        match self {
            ModelParams::HomPoisson { rates } => rates[[k, l]],
            ModelParams::HomHawkes { baseline, .. } => baseline[[k, l]],
            ModelParams::InhomPoisson { coef, .. } | ModelParams::InhomHawkes { coef, .. } => {
                coef[[k, l, h]]
            }
        }
    }

    pub fn base_mut(&mut self, k: usize, l: usize, h: usize) -> &mut f64 {
        match self {
            ModelParams::HomPoisson { rates } => &mut rates[[k, l]],
            ModelParams::HomHawkes { baseline, .. } => &mut baseline[[k, l]],
            ModelParams::InhomPoisson { coef, .. } | ModelParams::InhomHawkes { coef, .. } => {
                &mut coef[[k, l, h]]
            }
        }
    }

    /// Baseline intensity `μ_kl(t)` (the whole intensity for Poisson families).
    pub fn baseline_at(&self, k: usize, l: usize, t: f64) -> f64 {
        self.base(k, l, self.bin_of(t))
    }

    /// Measure of `[a, b]` falling in each bin (a single entry when homogeneous).
    pub fn bin_measures(&self, a: f64, b: f64) -> Vec<f64> {
        match self.basis() {
            Some(basis) => basis.integrals(a, b),
            None => vec![(b - a).max(0.0)],
        }
    }

    /// `∫_a^b μ_kl(t) dt`.
    pub fn baseline_integral(&self, k: usize, l: usize, a: f64, b: f64) -> f64 {
        self.bin_measures(a, b)
            .iter()
            .enumerate()
            .map(|(h, w)| w * self.base(k, l, h))
            .sum()
    }

    pub fn excitation(&self, k: usize, l: usize) -> f64 {
        match self {
            ModelParams::HomHawkes { excitation, .. } | ModelParams::InhomHawkes { excitation, .. } => {
                excitation[[k, l]]
            }
            _ => 0.0,
        }
    }

    pub fn excitation_matrix(&self) -> Option<&Array2<f64>> {
        match self {
            ModelParams::HomHawkes { excitation, .. } | ModelParams::InhomHawkes { excitation, .. } => {
                Some(excitation)
            }
            _ => None,
        }
    }

    pub fn decay(&self) -> Option<f64> {
        match self {
            ModelParams::HomHawkes { decay, .. } | ModelParams::InhomHawkes { decay, .. } => {
                Some(*decay)
            }
            _ => None,
        }
    }

    /// K×K matrix of time-averaged baselines (mean over bins).
    pub fn mean_baseline(&self) -> Array2<f64> {
        let k = self.n_classes();
        let h = self.n_bins();
        Array2::from_shape_fn((k, k), |(a, b)| {
            (0..h).map(|x| self.base(a, b, x)).sum::<f64>() / h as f64
        })
    }

    /// Rejects Hawkes parameters with any excitation `b_kl >= 1`.
    pub fn check_stationary(&self) -> Result<()> {
        if let Some(b) = self.excitation_matrix() {
            for ((k, l), &v) in b.indexed_iter() {
                if v >= 1.0 {
                    return Err(Error::NonStationary { k, l, value: v });
                }
            }
        }
        Ok(())
    }

    /// Structural checks: square blocks, finite nonnegative values, positive decay.
    pub fn validate(&self) -> Result<()> {
        let k = self.n_classes();
        if k == 0 {
            return Err(Error::invalid("model needs at least one class"));
        }
        let h = self.n_bins();
        let shape_ok = match self {
            ModelParams::HomPoisson { rates } => rates.dim() == (k, k),
            ModelParams::InhomPoisson { coef, .. } => coef.dim() == (k, k, h),
            ModelParams::HomHawkes {
                baseline, excitation, ..
            } => baseline.dim() == (k, k) && excitation.dim() == (k, k),
            ModelParams::InhomHawkes {
                coef, excitation, ..
            } => coef.dim() == (k, k, h) && excitation.dim() == (k, k),
        };
        if !shape_ok {
            return Err(Error::invalid("parameter arrays have inconsistent shapes"));
        }
        for a in 0..k {
            for b in 0..k {
                for x in 0..h {
                    let v = self.base(a, b, x);
                    if !(v.is_finite() && v >= 0.0) {
                        return Err(Error::invalid(format!("baseline ({a},{b},{x}) = {v}")));
                    }
                }
                let e = self.excitation(a, b);
                if !(e.is_finite() && e >= 0.0) {
                    return Err(Error::invalid(format!("excitation ({a},{b}) = {e}")));
                }
            }
        }
        if let Some(d) = self.decay() {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::Domain(format!("decay must be positive, got {d}")));
            }
        }
        Ok(())
    }

    /// Relabels classes: class `k` of `self` becomes class `perm[k]` of the result.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let k = self.n_classes();
        let h = self.n_bins();
        let mut out = self.clone();
        for a in 0..k {
            for b in 0..k {
                for x in 0..h {
                    *out.base_mut(perm[a], perm[b], x) = self.base(a, b, x);
                }
            }
        }
        if let (Some(src), Some(dst)) = (self.excitation_matrix(), out.excitation_matrix_mut()) {
            for a in 0..k {
                for b in 0..k {
                    dst[[perm[a], perm[b]]] = src[[a, b]];
                }
            }
        }
        out
    }

    pub(crate) fn excitation_matrix_mut(&mut self) -> Option<&mut Array2<f64>> {
        match self {
            ModelParams::HomHawkes { excitation, .. } | ModelParams::InhomHawkes { excitation, .. } => {
                Some(excitation)
            }
            _ => None,
        }
    }

    pub(crate) fn decay_mut(&mut self) -> Option<&mut f64> {
        match self {
            ModelParams::HomHawkes { decay, .. } | ModelParams::InhomHawkes { decay, .. } => {
                Some(decay)
            }
            _ => None,
        }
    }

    /// All parameters flattened: baselines, then excitations, then the decay.
    pub fn to_flat(&self) -> Vec<f64> {
        let k = self.n_classes();
        let h = self.n_bins();
        let mut v = Vec::with_capacity(k * k * (h + 1) + 1);
        for a in 0..k {
            for b in 0..k {
                for x in 0..h {
                    v.push(self.base(a, b, x));
                }
            }
        }
        if let Some(e) = self.excitation_matrix() {
            v.extend(e.iter().copied());
        }
        if let Some(d) = self.decay() {
            v.push(d);
        }
        v
    }
}

/// Conditional intensity `λ_kl(t)` given the pair's past event times.
///
/// Events of the history that coincide with `t` do not excite it.
pub fn intensity(params: &ModelParams, k: usize, l: usize, t: f64, history: &[f64]) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("intensity evaluated at negative time {t}")));
    }
    let base = params.baseline_at(k, l, t);
    let Some(decay) = params.decay() else {
        return Ok(base);
    };
    if !(decay > 0.0) {
        return Err(Error::Domain(format!("decay must be positive, got {decay}")));
    }
    let mut excite = 0.0;
    for &s in history {
        if s > t {
            return Err(Error::Domain(format!("history time {s} is after evaluation time {t}")));
        }
        if s < t {
            excite += decay * (-decay * (t - s)).exp();
        }
    }
    Ok(base + params.excitation(k, l) * excite)
}

/// Variational state: responsibilities `tau` (m×K), cumulative log-evidence
/// `log_s` (m×K) and mixing weights `pi` (K).
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    pub tau: Array2<f64>,
    pub log_s: Array2<f64>,
    pub pi: Array1<f64>,
}

impl LatentState {
    pub fn m(&self) -> usize {
        self.tau.nrows()
    }

    pub fn k(&self) -> usize {
        self.tau.ncols()
    }

    /// Hard assignment `argmax_k tau_ik`, lowest index on ties.
    pub fn z_hat(&self) -> Vec<usize> {
        argmax_rows(&self.tau)
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = self.clone();
        for (k, &p) in perm.iter().enumerate() {
            out.tau.column_mut(p).assign(&self.tau.column(k));
            out.log_s.column_mut(p).assign(&self.log_s.column(k));
            out.pi[p] = self.pi[k];
        }
        out
    }
}

pub fn argmax_rows(tau: &Array2<f64>) -> Vec<usize> {
    tau.rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

/// Nested-array form used for JSON input and output.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum ParamsRepr {
    HomPoisson {
        rates: Vec<Vec<f64>>,
    },
    InhomPoisson {
        coef: Vec<Vec<Vec<f64>>>,
        basis: StepBasis,
    },
    HomHawkes {
        baseline: Vec<Vec<f64>>,
        excitation: Vec<Vec<f64>>,
        decay: f64,
    },
    InhomHawkes {
        coef: Vec<Vec<Vec<f64>>>,
        basis: StepBasis,
        excitation: Vec<Vec<f64>>,
        decay: f64,
    },
}

fn to_nested2(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn to_nested3(a: &Array3<f64>) -> Vec<Vec<Vec<f64>>> {
    let (k, l, _) = a.dim();
    (0..k)
        .map(|i| (0..l).map(|j| a.slice(ndarray::s![i, j, ..]).to_vec()).collect())
        .collect()
}

fn from_nested2(v: Vec<Vec<f64>>) -> Result<Array2<f64>> {
    let rows = v.len();
    let cols = v.first().map_or(0, Vec::len);
    if v.iter().any(|r| r.len() != cols) {
        return Err(Error::invalid("ragged matrix"));
    }
    Array2::from_shape_vec((rows, cols), v.into_iter().flatten().collect())
        .map_err(|e| Error::invalid(e.to_string()))
}

fn from_nested3(v: Vec<Vec<Vec<f64>>>) -> Result<Array3<f64>> {
    let a = v.len();
    let b = v.first().map_or(0, Vec::len);
    let c = v.first().and_then(|r| r.first()).map_or(0, Vec::len);
    if v.iter().any(|r| r.len() != b || r.iter().any(|x| x.len() != c)) {
        return Err(Error::invalid("ragged coefficient tensor"));
    }
    Array3::from_shape_vec((a, b, c), v.into_iter().flatten().flatten().collect())
        .map_err(|e| Error::invalid(e.to_string()))
}

impl From<ModelParams> for ParamsRepr {
    fn from(p: ModelParams) -> Self {
        match p {
            ModelParams::HomPoisson { rates } => ParamsRepr::HomPoisson {
                rates: to_nested2(&rates),
            },
            ModelParams::InhomPoisson { coef, basis } => ParamsRepr::InhomPoisson {
                coef: to_nested3(&coef),
                basis,
            },
            ModelParams::HomHawkes {
                baseline,
                excitation,
                decay,
            } => ParamsRepr::HomHawkes {
                baseline: to_nested2(&baseline),
                excitation: to_nested2(&excitation),
                decay,
            },
            ModelParams::InhomHawkes {
                coef,
                basis,
                excitation,
                decay,
            } => ParamsRepr::InhomHawkes {
                coef: to_nested3(&coef),
                basis,
                excitation: to_nested2(&excitation),
                decay,
            },
        }
    }
}

impl TryFrom<ParamsRepr> for ModelParams {
    type Error = Error;

    fn try_from(r: ParamsRepr) -> Result<Self> {
        let p = match r {
            ParamsRepr::HomPoisson { rates } => ModelParams::HomPoisson {
                rates: from_nested2(rates)?,
            },
            ParamsRepr::InhomPoisson { coef, basis } => ModelParams::InhomPoisson {
                coef: from_nested3(coef)?,
                basis,
            },
            ParamsRepr::HomHawkes {
                baseline,
                excitation,
                decay,
            } => ModelParams::HomHawkes {
                baseline: from_nested2(baseline)?,
                excitation: from_nested2(excitation)?,
                decay,
            },
            ParamsRepr::InhomHawkes {
                coef,
                basis,
                excitation,
                decay,
            } => ModelParams::InhomHawkes {
                coef: from_nested3(coef)?,
                basis,
                excitation: from_nested2(excitation)?,
                decay,
            },
        };
        p.validate()?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn hom_poisson_intensity_is_constant() {
        let p = ModelParams::HomPoisson {
            rates: array![[0.6, 0.2], [0.1, 1.0]],
        };
        for t in [0.0, 1.5, 400.0] {
            assert_eq!(intensity(&p, 0, 0, t, &[]).unwrap(), 0.6);
        }
    }

    fn hawkes() -> ModelParams {
        ModelParams::HomHawkes {
            baseline: array![[0.5]],
            excitation: array![[0.5]],
            decay: 1.0,
        }
    }

    #[test]
    fn hawkes_intensity_without_history_is_baseline() {
        assert_eq!(intensity(&hawkes(), 0, 0, 3.0, &[]).unwrap(), 0.5);
    }

    #[test]
    fn hawkes_intensity_one_point() {
        let t = 4.0;
        let v = intensity(&hawkes(), 0, 0, t, &[t - std::f64::consts::LN_2]).unwrap();
        assert!((v - 0.75).abs() < 1e-12);
    }

    #[test]
    fn intensity_rejects_future_history_and_negative_time() {
        assert!(matches!(intensity(&hawkes(), 0, 0, 1.0, &[2.0]), Err(Error::Domain(_))));
        assert!(matches!(intensity(&hawkes(), 0, 0, -1.0, &[]), Err(Error::Domain(_))));
        let bad = ModelParams::HomHawkes {
            baseline: array![[0.5]],
            excitation: array![[0.5]],
            decay: -1.0,
        };
        assert!(matches!(intensity(&bad, 0, 0, 1.0, &[0.5]), Err(Error::Domain(_))));
    }

    #[test]
    fn window_counts() {
        assert_eq!(WindowConfig::new(5.0, 500.0).unwrap().n_windows, 100);
        assert_eq!(WindowConfig::new(5.0, 10.0).unwrap().n_windows, 2);
        let partial = WindowConfig::new(4.0, 10.0).unwrap();
        assert_eq!(partial.n_windows, 3);
        assert_eq!(partial.bounds(3), (8.0, 10.0));
        assert_eq!(partial.window_of(10.0), 3);
    }

    #[test]
    fn step_basis_integrals_partition_the_interval() {
        let b = StepBasis::new(7, 1.0).unwrap();
        let w = b.integrals(0.5, 15.25);
        assert!((w.iter().sum::<f64>() - 14.75).abs() < 1e-12);
        // [0.5,1) in bin 0, two full weeks, [14,15) bin 0 again, [15,15.25) bin 1
        assert!((w[0] - 2.5).abs() < 1e-12);
        assert!((w[1] - 2.25).abs() < 1e-12);
        assert_eq!(b.bin(13.5), 6);
        assert_eq!(b.evaluate(2.2), vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn edge_list_validation() {
        assert!(matches!(EdgeList::new(3, [(1, 1)]), Err(Error::SelfPair(1))));
        assert!(matches!(
            EdgeList::new(2, [(0, 2)]),
            Err(Error::NodeOutOfRange { id: 2, m: 2 })
        ));
        assert!(EdgeList::new(2, []).unwrap().is_empty());
        let a = EdgeList::new(3, [(0, 1), (0, 1), (2, 0)]).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a.out_pairs(0), &[0]);
        assert_eq!(a.in_pairs(0), &[1]);
    }

    #[test]
    fn edge_list_from_events() {
        let ev = [Event::new(0, 1, 0.1), Event::new(0, 1, 0.2), Event::new(2, 0, 0.3)];
        let a = EdgeList::from_events(&ev).unwrap();
        assert_eq!((a.len(), a.m()), (2, 3));
        assert!(EdgeList::from_events(&[]).is_err());
    }

    #[test]
    fn params_json_shape_round_trips() {
        let p = ModelParams::InhomHawkes {
            coef: Array3::from_shape_fn((2, 2, 3), |(a, b, c)| 0.1 + (a + 2 * b + 4 * c) as f64),
            basis: StepBasis::new(3, 2.0).unwrap(),
            excitation: array![[0.1, 0.2], [0.3, 0.4]],
            decay: 1.5,
        };
        let repr: ParamsRepr = p.clone().into();
        let back = ModelParams::try_from(repr).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn permutation_moves_blocks() {
        let p = ModelParams::HomPoisson {
            rates: array![[1.0, 2.0], [3.0, 4.0]],
        };
        let q = p.permuted(&[1, 0]);
        assert_eq!(q.base(1, 1, 0), 1.0);
        assert_eq!(q.base(0, 1, 0), 3.0);
    }
}
