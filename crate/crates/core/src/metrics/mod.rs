//! Distances between predictor outputs.

mod assignment;
mod displacement;
mod hellinger;
mod ot;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::scene::PredictionSet;

pub use assignment::{solve_assignment, Assignment};
pub use displacement::{ade_fde, AdeFde};
pub use hellinger::hellinger;
pub use ot::{
    cost_matrix, round_to_marginals, sinkhorn, trajectory_cost, wasserstein, wasserstein_detailed,
    CostExponent, OtConfig, OtResult, Regularization, SinkhornOutput, Solver,
    TrajectoryDistribution,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("trajectory lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("empty distribution")]
    Empty,
    #[error(
        "Sinkhorn did not converge after {iterations} iterations (marginal residual {residual:e})"
    )]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("need at least 2 results for pairwise distances, got {0}")]
    TooFewResults(usize),
    #[error("prediction {0} has no probability map")]
    MissingProbMap(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Distance used to compare two predictions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    Wasserstein(OtConfig),
    Hellinger,
}

impl Distance {
    pub fn between<S: Scalar>(
        &self,
        a: &PredictionSet<S>,
        b: &PredictionSet<S>,
    ) -> Result<S, MetricError> {
        match self {
            Self::Wasserstein(cfg) => wasserstein(
                &TrajectoryDistribution::from_prediction(a)?,
                &TrajectoryDistribution::from_prediction(b)?,
                cfg,
            ),
            Self::Hellinger => {
                let p = a.prob_map().ok_or(MetricError::MissingProbMap(0))?;
                let q = b.prob_map().ok_or(MetricError::MissingProbMap(1))?;
                hellinger(p, q)
            }
        }
    }
}

/// `d` over all unordered pairs `(i, j)`, `i < j`, in lexicographic order.
pub fn pairwise_distances<S: Scalar>(
    results: &[PredictionSet<S>],
    d: &Distance,
) -> Result<Vec<S>, MetricError> {
    if results.len() < 2 {
        return Err(MetricError::TooFewResults(results.len()));
    }
    if let Distance::Hellinger = d {
        if let Some(i) = results.iter().position(|r| r.prob_map().is_none()) {
            return Err(MetricError::MissingProbMap(i));
        }
    }
    let n = results.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    pairs
        .par_iter()
        .map(|&(i, j)| d.between(&results[i], &results[j]))
        .collect()
}
