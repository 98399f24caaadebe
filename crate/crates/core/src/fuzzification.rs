//! Fuzzification: partition latents into `K` subsets around medoids, noise
//! each medoid along the schedule to get the per-step representatives, and
//! score memberships by similarity to those representatives.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::condition::{Condition, ConditionSpace};
use crate::error::{invalid, Result};
use crate::numerics::{cosine01, sq_dist, RngStream};
use crate::rulebase::NoiseSchedule;

pub const DEFAULT_RESTARTS: usize = 10;

/// Result of a k-medoids run.
#[derive(Debug, Clone)]
pub struct Clustering {
    pub medoids: Vec<usize>,
    pub assignment: Vec<usize>,
    pub cost: f64,
    /// Cost after initialization and after every accepted swap.
    pub cost_history: Vec<f64>,
    pub restart: usize,
}

struct DistanceMatrix {
    n: usize,
    d: Vec<f64>,
}

impl DistanceMatrix {
    fn new(points: &[Vec<f64>]) -> Self {
        let n = points.len();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = sq_dist(&points[i], &points[j]).sqrt();
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        Self { n, d }
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }
}

/// Total distance from each point to its nearest medoid.
pub fn medoid_cost(points: &[Vec<f64>], medoids: &[usize]) -> f64 {
    points
        .iter()
        .map(|p| {
            medoids
                .iter()
                .map(|&m| sq_dist(p, &points[m]).sqrt())
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

/// k-medoids with the default number of restarts.
pub fn kmedoids(points: &[Vec<f64>], k: usize, rng: &RngStream, max_iter: usize) -> Result<Clustering> {
    kmedoids_restarts(points, k, DEFAULT_RESTARTS, max_iter, rng)
}

/// PAM best-improvement swaps from a k-medoids++ start, best of `restarts`.
///
/// Restart `r` draws from the sub-stream `("restart", r)`; the winner is the
/// lowest `(cost, r)` so the result does not depend on scheduling.
pub fn kmedoids_restarts(
    points: &[Vec<f64>],
    k: usize,
    restarts: usize,
    max_iter: usize,
    rng: &RngStream,
) -> Result<Clustering> {
    let n = points.len();
    if n == 0 {
        return invalid("kmedoids: no points");
    }
    if k == 0 || k > n {
        return invalid(format!("kmedoids: k = {k} must be in 1..={n}"));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return invalid("kmedoids: points of mixed dimension");
    }
    let dist = DistanceMatrix::new(points);
    let runs: Vec<Clustering> = (0..restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut sub = rng.derive_indexed("restart", r as u64);
            let init = plus_plus_init(&dist, k, &mut sub);
            let mut c = pam_swap(&dist, init, max_iter);
            c.restart = r;
            c
        })
        .collect();
    let best = runs
        .into_iter()
        .min_by(|a, b| a.cost.total_cmp(&b.cost).then(a.restart.cmp(&b.restart)))
        .expect("at least one restart");
    Ok(best)
}

fn plus_plus_init(dist: &DistanceMatrix, k: usize, rng: &mut RngStream) -> Vec<usize> {
    let n = dist.n;
    let mut medoids = vec![rng.uniform_int(0, n - 1)];
    let mut nearest: Vec<f64> = (0..n).map(|j| dist.get(j, medoids[0])).collect();
    while medoids.len() < k {
        let weights: Vec<f64> = nearest.iter().map(|d| d * d).collect();
        let total: f64 = weights.iter().sum();
        let pick = if total <= 0.0 {
            // every remaining point coincides with a medoid
            (0..n).find(|i| !medoids.contains(i)).expect("k <= n")
        } else {
            let mut u = rng.uniform() * total;
            let mut chosen = n - 1;
            for (i, w) in weights.iter().enumerate() {
                if *w > 0.0 && u < *w {
                    chosen = i;
                    break;
                }
                u -= w;
            }
            while medoids.contains(&chosen) {
                chosen = (chosen + 1) % n;
            }
            chosen
        };
        medoids.push(pick);
        for (j, nj) in nearest.iter_mut().enumerate() {
            *nj = nj.min(dist.get(j, pick));
        }
    }
    medoids
}

fn nearest_two(dist: &DistanceMatrix, medoids: &[usize], j: usize) -> (usize, f64, f64) {
    let mut best = (0, f64::INFINITY);
    let mut second = f64::INFINITY;
    for (slot, &m) in medoids.iter().enumerate() {
        let d = dist.get(j, m);
        if d < best.1 {
            second = best.1;
            best = (slot, d);
        } else if d < second {
            second = d;
        }
    }
    (best.0, best.1, second)
}

fn pam_swap(dist: &DistanceMatrix, mut medoids: Vec<usize>, max_iter: usize) -> Clustering {
    let n = dist.n;
    let k = medoids.len();
    let mut near: Vec<(usize, f64, f64)> = (0..n).map(|j| nearest_two(dist, &medoids, j)).collect();
    let mut cost: f64 = near.iter().map(|x| x.1).sum();
    let mut history = vec![cost];
    let mut is_medoid = vec![false; n];
    medoids.iter().for_each(|&m| is_medoid[m] = true);

    for _ in 0..max_iter {
        let mut best: Option<(f64, usize, usize)> = None;
        for slot in 0..k {
            for h in 0..n {
                if is_medoid[h] {
                    continue;
                }
                let mut delta = 0.0;
                for (j, &(ns, nd, sd)) in near.iter().enumerate() {
                    let dh = dist.get(j, h);
                    let new = if ns == slot { dh.min(sd) } else { dh.min(nd) };
                    delta += new - nd;
                }
                if best.is_none_or(|b| delta < b.0) {
                    best = Some((delta, slot, h));
                }
            }
        }
        match best {
            Some((delta, slot, h)) if delta < -1e-12 * cost.max(1.0) => {
                is_medoid[medoids[slot]] = false;
                is_medoid[h] = true;
                medoids[slot] = h;
                near = (0..n).map(|j| nearest_two(dist, &medoids, j)).collect();
                cost = near.iter().map(|x| x.1).sum();
                history.push(cost);
            }
            _ => break,
        }
    }
    Clustering {
        assignment: near.iter().map(|x| x.0).collect(),
        medoids,
        cost,
        cost_history: history,
        restart: 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrajectoryMode {
    /// Expected forward state `sqrt(abar_t) d`.
    #[default]
    Mean,
    /// One forward-marginal draw per step.
    Sampled,
}

impl std::str::FromStr for TrajectoryMode {
    type Err = crate::error::DfsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Self::Mean),
            "sampled" => Ok(Self::Sampled),
            other => invalid(format!("unknown trajectory mode '{other}'")),
        }
    }
}

/// Noised sequence of one medoid latent, `states[t]` for `t = 0..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentativeTrajectory {
    pub path: usize,
    pub condition: Condition,
    pub states: Vec<Vec<f64>>,
}

impl RepresentativeTrajectory {
    pub fn clean(&self) -> &[f64] {
        &self.states[0]
    }
}

/// Computed once per path; forward and backward rules at step `t` share
/// `states[t]`. In sampled mode the caller passes a path-keyed stream and
/// step `t` draws from its `("step", t)` sub-stream.
pub fn build_trajectory(
    path: usize,
    d: &[f64],
    condition: Condition,
    schedule: &NoiseSchedule,
    mode: TrajectoryMode,
    rng: &RngStream,
) -> RepresentativeTrajectory {
    let mut states = Vec::with_capacity(schedule.steps() + 1);
    states.push(d.to_vec());
    for t in 1..=schedule.steps() {
        let ab = schedule.alpha_bar(t);
        let s = ab.sqrt();
        let state = match mode {
            TrajectoryMode::Mean => d.iter().map(|x| s * x).collect(),
            TrajectoryMode::Sampled => {
                let eps = rng.derive_indexed("step", t as u64).normal_vec(d.len());
                let n = (1.0 - ab).sqrt();
                d.iter().zip(&eps).map(|(x, e)| s * x + n * e).collect()
            }
        };
        states.push(state);
    }
    RepresentativeTrajectory {
        path,
        condition,
        states,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MembershipParams {
    /// Weight of the semantic term; the feature term gets `1 - alpha`.
    pub alpha: f64,
}

impl Default for MembershipParams {
    fn default() -> Self {
        Self { alpha: 0.5 }
    }
}

impl MembershipParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return invalid(format!("alpha must lie in [0, 1], got {alpha}"));
        }
        Ok(Self { alpha })
    }
}

/// Similarity-based membership of `z` (under `cond_z`) in the subset
/// represented by `d` (under `cond_d`).
pub fn smc(
    z: &[f64],
    d: &[f64],
    cond_z: Condition,
    cond_d: Condition,
    space: &ConditionSpace,
    params: MembershipParams,
) -> Result<f64> {
    let feature = cosine01(z, d)?;
    let semantic = cosine01(space.embed(cond_z)?, space.embed(cond_d)?)?;
    let m = params.alpha * semantic + (1.0 - params.alpha) * feature;
    Ok(m.clamp(0.0, 1.0))
}
