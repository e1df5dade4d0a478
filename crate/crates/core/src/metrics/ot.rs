//! Wasserstein distance between sampled trajectory distributions.
//!
//! Equal-size uniform supports up to [`OtConfig::exact_threshold`] are solved
//! exactly as an assignment problem. Anything else goes through log-domain
//! Sinkhorn iterations with epsilon scaling; the entropic plan is rounded onto
//! the feasible set before its cost is reported, so the Sinkhorn value is
//! always an upper bound on the exact one.

use serde::{Deserialize, Serialize};

use super::assignment::solve_assignment;
use super::MetricError;
use crate::geometry::Trajectory;
use crate::scalar::Scalar;
use crate::scene::PredictionSet;

/// Exponent `p` of the ground cost `||x - y||^p`; the reported distance is
/// `(min E[cost])^(1/p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostExponent {
    /// `E ||x - y||`.
    #[default]
    Linear,
    /// `sqrt(E ||x - y||^2)`.
    Squared,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum Regularization {
    /// Multiple of the median entry of the cost matrix.
    RelativeToMedian(f64),
    Absolute(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OtConfig {
    pub regularization: Regularization,
    pub max_iterations: usize,
    /// L1 marginal violation at which Sinkhorn stops.
    pub tolerance: f64,
    /// Largest support size handled by the exact solver.
    pub exact_threshold: usize,
    pub cost_exponent: CostExponent,
}

impl Default for OtConfig {
    fn default() -> Self {
        Self {
            regularization: Regularization::RelativeToMedian(1e-2),
            max_iterations: 1000,
            tolerance: 1e-9,
            exact_threshold: 64,
            cost_exponent: CostExponent::Linear,
        }
    }
}

impl OtConfig {
    pub fn validate(&self) -> Result<(), MetricError> {
        let eps = match self.regularization {
            Regularization::RelativeToMedian(v) | Regularization::Absolute(v) => v,
        };
        if !(eps > 0.0 && eps.is_finite()) || self.max_iterations == 0 || !(self.tolerance > 0.0) {
            return Err(MetricError::Config(
                "regularization, iteration limit and tolerance must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Forces the Sinkhorn path regardless of support size.
    pub fn sinkhorn_only(mut self) -> Self {
        self.exact_threshold = 0;
        self
    }
}

/// Uniformly weighted empirical distribution over flattened trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDistribution<S = f64> {
    support: Vec<Vec<S>>,
    dim: usize,
}

impl<S: Scalar> TrajectoryDistribution<S> {
    pub fn from_trajectories(trajectories: &[Trajectory<S>]) -> Result<Self, MetricError> {
        let first = trajectories.first().ok_or(MetricError::Empty)?;
        let dim = 2 * first.len();
        let support: Vec<Vec<S>> = trajectories.iter().map(Trajectory::flatten).collect();
        if support.iter().any(|s| s.len() != dim) {
            return Err(MetricError::LengthMismatch {
                left: first.len(),
                right: support
                    .iter()
                    .map(|s| s.len() / 2)
                    .find(|&l| 2 * l != dim)
                    .unwrap_or(0),
            });
        }
        Ok(Self { support, dim })
    }

    pub fn from_prediction(pred: &PredictionSet<S>) -> Result<Self, MetricError> {
        Self::from_trajectories(pred.trajectories())
    }

    pub fn support(&self) -> &[Vec<S>] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Ambient dimension 2T.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weight(&self) -> S {
        S::one() / S::of_usize(self.support.len())
    }
}

fn euclid<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .fold(S::zero(), |acc, v| acc + v)
        .sqrt()
}

/// Ground cost between two trajectories: the Euclidean norm of their
/// pointwise difference in R^{2T}.
pub fn trajectory_cost<S: Scalar>(a: &Trajectory<S>, b: &Trajectory<S>) -> Result<S, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.points()
        .iter()
        .zip(b.points())
        .map(|(p, q)| p.dist_sq(q))
        .fold(S::zero(), |acc, v| acc + v)
        .sqrt())
}

/// Cost matrix `||p_i - q_j||^exponent`, row-major.
pub fn cost_matrix<S: Scalar>(
    p: &TrajectoryDistribution<S>,
    q: &TrajectoryDistribution<S>,
    exponent: CostExponent,
) -> Vec<S> {
    let mut out = Vec::with_capacity(p.len() * q.len());
    for a in p.support() {
        for b in q.support() {
            let d = euclid(a, b);
            out.push(match exponent {
                CostExponent::Linear => d,
                CostExponent::Squared => d * d,
            });
        }
    }
    out
}

/// Which solver produced a distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Exact,
    Sinkhorn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OtResult<S> {
    pub distance: S,
    /// Expected ground cost under the returned plan (before the 1/p root).
    pub transport_cost: S,
    pub solver: Solver,
    pub iterations: usize,
    pub epsilon: Option<S>,
}

/// Wasserstein distance between `p` and `q`.
pub fn wasserstein<S: Scalar>(
    p: &TrajectoryDistribution<S>,
    q: &TrajectoryDistribution<S>,
    cfg: &OtConfig,
) -> Result<S, MetricError> {
    wasserstein_detailed(p, q, cfg).map(|r| r.distance)
}

pub fn wasserstein_detailed<S: Scalar>(
    p: &TrajectoryDistribution<S>,
    q: &TrajectoryDistribution<S>,
    cfg: &OtConfig,
) -> Result<OtResult<S>, MetricError> {
    cfg.validate()?;
    if p.is_empty() || q.is_empty() {
        return Err(MetricError::Empty);
    }
    if p.dim() != q.dim() {
        return Err(MetricError::LengthMismatch {
            left: p.dim() / 2,
            right: q.dim() / 2,
        });
    }
    let cost = cost_matrix(p, q, cfg.cost_exponent);
    let finish = |transport_cost: S, solver, iterations, epsilon| {
        let transport_cost = transport_cost.max(S::zero());
        let distance = match cfg.cost_exponent {
            CostExponent::Linear => transport_cost,
            CostExponent::Squared => transport_cost.sqrt(),
        };
        OtResult {
            distance,
            transport_cost,
            solver,
            iterations,
            epsilon,
        }
    };

    if p.len() == q.len() && p.len() <= cfg.exact_threshold {
        let a = solve_assignment(&cost, p.len(), q.len())?;
        return Ok(finish(
            a.total_cost / S::of_usize(p.len()),
            Solver::Exact,
            0,
            None,
        ));
    }

    let eps = match cfg.regularization {
        Regularization::Absolute(v) => S::of(v),
        Regularization::RelativeToMedian(f) => {
            let m = median(&cost);
            if m <= S::zero() {
                // more than half the pairs coincide; scale by the mean instead
                let mean = cost.iter().copied().sum::<S>() / S::of_usize(cost.len());
                if mean <= S::zero() {
                    return Ok(finish(S::zero(), Solver::Sinkhorn, 0, None));
                }
                S::of(f) * mean
            } else {
                S::of(f) * m
            }
        }
    };
    let a = vec![p.weight(); p.len()];
    let b = vec![q.weight(); q.len()];
    let out = sinkhorn(&a, &b, &cost, eps, cfg.max_iterations, S::of(cfg.tolerance))?;
    let plan = round_to_marginals(out.plan, &a, &b);
    let transport = plan
        .iter()
        .zip(&cost)
        .map(|(&g, &c)| g * c)
        .fold(S::zero(), |x, y| x + y);
    Ok(finish(
        transport,
        Solver::Sinkhorn,
        out.iterations,
        Some(eps),
    ))
}

fn median<S: Scalar>(values: &[S]) -> S {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite costs"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / S::of(2.0)
    }
}

#[derive(Debug, Clone)]
pub struct SinkhornOutput<S> {
    /// Entropic plan, row-major.
    pub plan: Vec<S>,
    pub iterations: usize,
    /// L1 violation of the column marginals at exit.
    pub residual: S,
}

fn logsumexp<S: Scalar>(values: impl Iterator<Item = S> + Clone) -> S {
    let m = values.clone().fold(S::neg_infinity(), S::max);
    if m == S::neg_infinity() {
        return m;
    }
    m + values
        .map(|v| (v - m).exp())
        .fold(S::zero(), |a, b| a + b)
        .ln()
}

/// Log-domain Sinkhorn for `min <P, C> - eps H(P)` with marginals `a`, `b`.
///
/// Epsilon is annealed geometrically from the largest cost down to `eps`;
/// `max_iterations` bounds the iterations spent at the target `eps`.
pub fn sinkhorn<S: Scalar>(
    a: &[S],
    b: &[S],
    cost: &[S],
    eps: S,
    max_iterations: usize,
    tolerance: S,
) -> Result<SinkhornOutput<S>, MetricError> {
    let (n, m) = (a.len(), b.len());
    if cost.len() != n * m || n == 0 || m == 0 {
        return Err(MetricError::Shape(format!("cost matrix must be {n}x{m}")));
    }
    if !(eps > S::zero()) {
        return Err(MetricError::Config(
            "regularization must be positive".into(),
        ));
    }
    let log_a: Vec<S> = a.iter().map(|w| w.ln()).collect();
    let log_b: Vec<S> = b.iter().map(|w| w.ln()).collect();
    let mut f = vec![S::zero(); n];
    let mut g = vec![S::zero(); m];

    let update = |f: &mut [S], g: &mut [S], e: S| {
        for i in 0..n {
            let row = &cost[i * m..(i + 1) * m];
            let lse = logsumexp(g.iter().zip(row).map(|(&gj, &c)| (gj - c) / e));
            f[i] = e * (log_a[i] - lse);
        }
        for j in 0..m {
            let lse = logsumexp((0..n).map(|i| (f[i] - cost[i * m + j]) / e));
            g[j] = e * (log_b[j] - lse);
        }
    };
    // after a g-update the columns are exact, so measure the rows
    let residual = |f: &[S], g: &[S], e: S| -> S {
        (0..n)
            .map(|i| {
                let r = (0..m)
                    .map(|j| ((f[i] + g[j] - cost[i * m + j]) / e).exp())
                    .fold(S::zero(), |x, y| x + y);
                (r - a[i]).abs()
            })
            .fold(S::zero(), |x, y| x + y)
    };

    let c_max = cost.iter().copied().fold(S::zero(), S::max);
    let mut iterations = 0;
    let mut e = c_max;
    let half = S::of(0.5);
    while e > eps {
        for _ in 0..20 {
            update(&mut f, &mut g, e);
            iterations += 1;
        }
        e = e * half;
    }

    let mut res = S::infinity();
    for _ in 0..max_iterations {
        update(&mut f, &mut g, eps);
        iterations += 1;
        res = residual(&f, &g, eps);
        if res <= tolerance {
            let plan = (0..n * m)
                .map(|k| ((f[k / m] + g[k % m] - cost[k]) / eps).exp())
                .collect();
            return Ok(SinkhornOutput {
                plan,
                iterations,
                residual: res,
            });
        }
        if !res.is_finite() {
            break;
        }
    }
    Err(MetricError::NonConvergence {
        iterations,
        residual: res.f64(),
    })
}

/// Projects an approximate plan onto the transport polytope of `a`, `b`
/// (scale down over-full rows and columns, then spread the deficit).
pub fn round_to_marginals<S: Scalar>(mut plan: Vec<S>, a: &[S], b: &[S]) -> Vec<S> {
    let (n, m) = (a.len(), b.len());
    for i in 0..n {
        let r: S = plan[i * m..(i + 1) * m].iter().copied().sum();
        if r > a[i] {
            let x = a[i] / r;
            plan[i * m..(i + 1) * m]
                .iter_mut()
                .for_each(|v| *v = *v * x);
        }
    }
    for j in 0..m {
        let c = (0..n)
            .map(|i| plan[i * m + j])
            .fold(S::zero(), |x, y| x + y);
        if c > b[j] {
            let y = b[j] / c;
            (0..n).for_each(|i| plan[i * m + j] = plan[i * m + j] * y);
        }
    }
    let err_r: Vec<S> = (0..n)
        .map(|i| a[i] - plan[i * m..(i + 1) * m].iter().copied().sum::<S>())
        .collect();
    let err_c: Vec<S> = (0..m)
        .map(|j| {
            b[j] - (0..n)
                .map(|i| plan[i * m + j])
                .fold(S::zero(), |x, y| x + y)
        })
        .collect();
    let mass: S = err_r.iter().copied().sum();
    if mass > S::zero() {
        for i in 0..n {
            for j in 0..m {
                plan[i * m + j] = plan[i * m + j] + err_r[i] * err_c[j] / mass;
            }
        }
    }
    plan
}
