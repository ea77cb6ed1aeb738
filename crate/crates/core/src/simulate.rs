//! Ground-truth generation for the four block point-process families.
//!
//! Each pair is simulated independently from its own ChaCha stream, selected
//! by `(src, dst)`, so results do not depend on pair order or thread count.

use ndarray::{array, Array2, Array3};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, WeightedIndex};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EdgeList, Event, ModelParams, StepBasis};

/// How out-partners are assigned when sampling an edge list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DegreeScenario {
    /// Every node gets exactly `degree` distinct out-partners.
    Even { degree: usize },
    /// `n_dense` randomly chosen nodes get `dense_degree` partners, the rest `sparse_degree`.
    Uneven {
        n_dense: usize,
        dense_degree: usize,
        sparse_degree: usize,
    },
}

impl DegreeScenario {
    /// Uneven scenario with `dense_degree = ceil(m^0.7)` and `sparse_degree = 3`.
    pub fn uneven_default(m: usize, n_dense: usize) -> Self {
        DegreeScenario::Uneven {
            n_dense,
            dense_degree: (m as f64).powf(0.7).ceil() as usize,
            sparse_degree: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub z_star: Vec<usize>,
    pub pi: Vec<f64>,
    pub params: ModelParams,
    #[serde(skip)]
    pub edges: Option<EdgeList>,
    #[serde(skip)]
    pub events: Vec<Event>,
    /// Nodes given the dense degree in an uneven scenario.
    #[serde(default)]
    pub dense_nodes: Vec<usize>,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// i.i.d. class draws from `pi`.
pub fn sample_memberships(m: usize, pi: &[f64], seed: u64) -> Result<Vec<usize>> {
    let total: f64 = pi.iter().sum();
    if pi.is_empty() || (total - 1.0).abs() > 1e-9 || pi.iter().any(|&p| !(p >= 0.0)) {
        return Err(Error::invalid(format!("mixing weights must lie on the simplex (sum {total})")));
    }
    let dist = WeightedIndex::new(pi).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = rng_for(seed, u64::MAX);
    Ok((0..m).map(|_| dist.sample(&mut rng)).collect())
}

/// Random edge list; also returns the dense node set (empty for `Even`).
pub fn sample_edge_list(m: usize, scenario: DegreeScenario, seed: u64) -> Result<(EdgeList, Vec<usize>)> {
    let mut rng = rng_for(seed, u64::MAX - 1);
    let degrees: Vec<usize>;
    let mut dense = Vec::new();
    match scenario {
        DegreeScenario::Even { degree } => {
            if degree >= m {
                return Err(Error::invalid(format!("degree {degree} must be below m={m}")));
            }
            degrees = vec![degree; m];
        }
        DegreeScenario::Uneven {
            n_dense,
            dense_degree,
            sparse_degree,
        } => {
            if dense_degree >= m || sparse_degree >= m {
                return Err(Error::invalid(format!("degrees must be below m={m}")));
            }
            if n_dense > m {
                return Err(Error::invalid(format!("{n_dense} dense nodes exceed m={m}")));
            }
            dense = sample(&mut rng, m, n_dense).into_vec();
            dense.sort_unstable();
            let mut d = vec![sparse_degree; m];
            for &i in &dense {
                d[i] = dense_degree;
            }
            degrees = d;
        }
    }
    let mut pairs = Vec::with_capacity(degrees.iter().sum());
    for (i, &d) in degrees.iter().enumerate() {
        // draw from the m-1 other nodes, skipping i
        for j in sample(&mut rng, m - 1, d) {
            let j = if j >= i { j + 1 } else { j };
            pairs.push((i as u32, j as u32));
        }
    }
    Ok((EdgeList::new(m, pairs)?, dense))
}

/// Simulates every pair of `edges` on `[0, horizon]` and merges the streams by time.
pub fn simulate(params: &ModelParams, edges: &EdgeList, z: &[usize], horizon: f64, seed: u64) -> Result<Vec<Event>> {
    params.validate()?;
    params.check_stationary()?;
    if z.len() != edges.m() {
        return Err(Error::LengthMismatch {
            left: z.len(),
            right: edges.m(),
        });
    }
    if !(horizon >= 0.0) {
        return Err(Error::invalid(format!("horizon must be nonnegative, got {horizon}")));
    }
    let per_pair: Vec<Vec<Event>> = edges
        .pairs()
        .par_iter()
        .map(|&(s, d)| {
            let mut rng = rng_for(seed, ((s as u64) << 32) | d as u64);
            let (k, l) = (z[s as usize], z[d as usize]);
            simulate_block(params, k, l, 0.0, horizon, &[], &mut rng)
                .into_iter()
                .map(|t| Event::new(s, d, t))
                .collect()
        })
        .collect();
    let mut events: Vec<Event> = per_pair.into_iter().flatten().collect();
    events.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.src.cmp(&b.src)).then(a.dst.cmp(&b.dst)));
    Ok(events)
}

/// Event times of a single block-`(k, l)` process on `(t0, t1]`, continuing from `history`.
///
/// Homogeneous Poisson uses exponential gaps; everything else uses Ogata
/// thinning with the exponential-kernel recursion for the excitation.
pub fn simulate_block<R: Rng + ?Sized>(
    params: &ModelParams,
    k: usize,
    l: usize,
    t0: f64,
    t1: f64,
    history: &[f64],
    rng: &mut R,
) -> Vec<f64> {
    let mut out = Vec::new();
    if t1 <= t0 {
        return out;
    }
    let h = params.n_bins();
    let base_max = (0..h).map(|x| params.base(k, l, x)).fold(0.0, f64::max);
    match params.decay() {
        None if h == 1 => {
            let rate = base_max;
            if rate <= 0.0 {
                return out;
            }
            let mut t = t0;
            loop {
                let gap: f64 = Exp1.sample(rng);
                t += gap / rate;
                if t > t1 {
                    break;
                }
                out.push(t);
            }
        }
        None => {
            if base_max <= 0.0 {
                return out;
            }
            let mut t = t0;
            loop {
                let gap: f64 = Exp1.sample(rng);
                t += gap / base_max;
                if t > t1 {
                    break;
                }
                if rng.gen::<f64>() * base_max <= params.baseline_at(k, l, t) {
                    out.push(t);
                }
            }
        }
        Some(decay) => {
            let b = params.excitation(k, l);
            // excitation x(t) = Σ λ e^{-λ(t-s)} at time t
            let mut x: f64 = history
                .iter()
                .filter(|&&s| s <= t0)
                .map(|&s| decay * (-decay * (t0 - s)).exp())
                .sum();
            let mut t = t0;
            loop {
                // x only decays between events, so the current value bounds the future
                let bound = base_max + b * x;
                if bound <= 0.0 {
                    break;
                }
                let gap: f64 = Exp1.sample(rng);
                let gap = gap / bound;
                t += gap;
                if t > t1 {
                    break;
                }
                x *= (-decay * gap).exp();
                let rate = params.baseline_at(k, l, t) + b * x;
                if rng.gen::<f64>() * bound <= rate {
                    out.push(t);
                    x += decay;
                }
            }
        }
    }
    out
}

/// Mixing weights used by the reference simulation.
pub fn reference_pi() -> Vec<f64> {
    vec![0.4, 0.3, 0.3]
}

/// Block rate matrix of the reference homogeneous Poisson simulation.
pub fn reference_poisson_rates() -> Array2<f64> {
    array![[0.6, 0.2, 0.3], [0.1, 1.0, 0.4], [0.5, 0.4, 0.8]]
}

/// Baseline, excitation and decay of the reference homogeneous Hawkes simulation.
pub fn reference_hawkes() -> (Array2<f64>, Array2<f64>, f64) {
    (
        array![[0.6, 0.2, 0.3], [0.1, 1.0, 0.4], [0.5, 0.2, 0.75]],
        array![[0.5, 0.1, 0.3], [0.4, 0.4, 0.4], [0.2, 0.6, 0.2]],
        1.0,
    )
}

/// Reference parameters for `kind` with three classes.
///
/// Inhomogeneous families modulate the homogeneous block matrix with a fixed
/// weekly-style profile over the basis bins.
pub fn reference_params(kind: crate::model::ModelKind, basis: StepBasis) -> ModelParams {
    use crate::model::ModelKind::*;
    let profile = |h: usize| 0.6 + 0.8 * ((h as f64 + 0.5) / basis.n_bins as f64);
    let modulate = |m: &Array2<f64>| {
        Array3::from_shape_fn((3, 3, basis.n_bins), |(a, b, h)| m[[a, b]] * profile(h))
    };
    match kind {
        HomPoisson => ModelParams::HomPoisson {
            rates: reference_poisson_rates(),
        },
        InhomPoisson => ModelParams::InhomPoisson {
            coef: modulate(&reference_poisson_rates()),
            basis,
        },
        HomHawkes => {
            let (baseline, excitation, decay) = reference_hawkes();
            ModelParams::HomHawkes {
                baseline,
                excitation,
                decay,
            }
        }
        InhomHawkes => {
            let (baseline, excitation, decay) = reference_hawkes();
            ModelParams::InhomHawkes {
                coef: modulate(&baseline),
                basis,
                excitation,
                decay,
            }
        }
    }
}

/// Draws memberships, an edge list and events in one go.
pub fn generate(
    params: ModelParams,
    pi: &[f64],
    m: usize,
    scenario: DegreeScenario,
    horizon: f64,
    seed: u64,
) -> Result<GroundTruth> {
    let z_star = sample_memberships(m, pi, seed)?;
    let (edges, dense_nodes) = sample_edge_list(m, scenario, seed)?;
    let events = simulate(&params, &edges, &z_star, horizon, seed)?;
    Ok(GroundTruth {
        z_star,
        pi: pi.to_vec(),
        params,
        edges: Some(edges),
        events,
        dense_nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelKind;

    #[test]
    fn degenerate_simplex() {
        let z = sample_memberships(50, &[1.0, 0.0, 0.0], 3).unwrap();
        assert!(z.iter().all(|&c| c == 0));
        assert!(sample_memberships(5, &[0.5, 0.4], 1).is_err());
    }

    #[test]
    fn memberships_are_near_proportions() {
        let pi = [0.4, 0.3, 0.3];
        for seed in 0..5 {
            let z = sample_memberships(100, &pi, seed).unwrap();
            for (k, &p) in pi.iter().enumerate() {
                let n = z.iter().filter(|&&c| c == k).count() as f64;
                let sd = (100.0 * p * (1.0 - p)).sqrt();
                assert!((n - 100.0 * p).abs() <= 3.0 * sd, "class {k}: {n}");
            }
        }
    }

    #[test]
    fn even_degrees() {
        let (a, dense) = sample_edge_list(100, DegreeScenario::Even { degree: 40 }, 9).unwrap();
        assert_eq!(a.len(), 4000);
        assert!((0..100).all(|i| a.out_degree(i) == 40));
        assert!(dense.is_empty());
        let (b, _) = sample_edge_list(2, DegreeScenario::Even { degree: 1 }, 0).unwrap();
        assert_eq!(b.pairs(), &[(0, 1), (1, 0)]);
        assert!(sample_edge_list(5, DegreeScenario::Even { degree: 5 }, 0).is_err());
    }

    #[test]
    fn uneven_degrees() {
        let sc = DegreeScenario::uneven_default(1000, 100);
        let (a, dense) = sample_edge_list(1000, sc, 4).unwrap();
        assert_eq!(dense.len(), 100);
        let heavy = (0..1000).filter(|&i| a.out_degree(i) > 3).count();
        assert_eq!(heavy, 100);
        assert!(dense.iter().all(|&i| a.out_degree(i) == 126));
    }

    #[test]
    fn zero_horizon_is_empty() {
        let (a, _) = sample_edge_list(10, DegreeScenario::Even { degree: 3 }, 0).unwrap();
        let z = vec![0; 10];
        for kind in [ModelKind::HomPoisson, ModelKind::InhomHawkes] {
            let p = reference_params(kind, StepBasis::new(7, 1.0).unwrap());
            assert!(simulate(&p, &a, &z, 0.0, 1).unwrap().is_empty());
        }
    }

    #[test]
    fn supercritical_is_rejected() {
        let p = ModelParams::HomHawkes {
            baseline: array![[0.5]],
            excitation: array![[1.0]],
            decay: 1.0,
        };
        let a = EdgeList::new(2, [(0, 1)]).unwrap();
        assert!(matches!(simulate(&p, &a, &[0, 0], 10.0, 0), Err(Error::NonStationary { .. })));
    }

    #[test]
    fn identical_seeds_identical_streams() {
        let p = reference_params(ModelKind::HomHawkes, StepBasis::new(7, 1.0).unwrap());
        let (a, _) = sample_edge_list(20, DegreeScenario::Even { degree: 4 }, 2).unwrap();
        let z = sample_memberships(20, &reference_pi(), 2).unwrap();
        let x = simulate(&p, &a, &z, 30.0, 77).unwrap();
        let y = simulate(&p, &a, &z, 30.0, 77).unwrap();
        assert_eq!(x, y);
        assert!(x.windows(2).all(|w| w[0].t <= w[1].t));
        assert_ne!(x, simulate(&p, &a, &z, 30.0, 78).unwrap());
    }

    #[test]
    fn inhomogeneous_thinning_matches_bin_means() {
        let basis = StepBasis::new(4, 1.0).unwrap();
        let coef = Array3::from_shape_vec((1, 1, 4), vec![0.5, 2.0, 0.1, 1.2]).unwrap();
        let p = ModelParams::InhomPoisson { coef, basis };
        let horizon = 4000.0;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let times = simulate_block(&p, 0, 0, 0.0, horizon, &[], &mut rng);
        let meas = basis.integrals(0.0, horizon);
        let mut counts = [0.0; 4];
        for t in times {
            counts[basis.bin(t)] += 1.0;
        }
        for h in 0..4 {
            let mean = p.base(0, 0, h) * meas[h];
            assert!((counts[h] - mean).abs() <= 4.0 * mean.sqrt(), "bin {h}: {} vs {mean}", counts[h]);
        }
    }
}
