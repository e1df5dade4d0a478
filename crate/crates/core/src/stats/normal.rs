use libm::erfc;
use serde::{Deserialize, Serialize};
use std::f64::consts::SQRT_2;

use super::StatsError;

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Upper tail `1 - Phi(z)`, accurate far into the tail.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    Greater,
    Less,
    TwoSided,
}

/// Mean and spread of the pairwise distances between source runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceBaseline {
    pub mu: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single pair.
    pub sigma: f64,
    pub n_pairs: usize,
}

impl SourceBaseline {
    pub fn from_distances(d: &[f64]) -> Result<Self, StatsError> {
        if d.is_empty() {
            return Err(StatsError::TooFewRuns(d.len()));
        }
        if d.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite);
        }
        let (mu, sigma) = mean_std(d);
        Ok(Self {
            mu,
            sigma,
            n_pairs: d.len(),
        })
    }
}

/// Mean and sample standard deviation. A single value has spread 0.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mu = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mu, 0.0);
    }
    let ss: f64 = v.iter().map(|x| (x - mu) * (x - mu)).sum();
    (mu, (ss / (n - 1.0)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZTestOptions {
    /// A baseline with `sigma <= degenerate_tol * max(1, |mu|)` is treated as
    /// degenerate, and so is a deviation `|d - mu|` below the same bound.
    pub degenerate_tol: f64,
}

impl Default for ZTestOptions {
    fn default() -> Self {
        Self {
            degenerate_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZTestOutcome {
    pub p_value: f64,
    /// `None` when the baseline is degenerate.
    pub z: Option<f64>,
    pub degenerate: bool,
}

/// One-sample z-test of `d` against the source baseline.
pub fn z_test(d: f64, base: &SourceBaseline, alternative: Alternative) -> ZTestOutcome {
    z_test_with(d, base, alternative, &ZTestOptions::default())
}

pub fn z_test_with(
    d: f64,
    base: &SourceBaseline,
    alternative: Alternative,
    opts: &ZTestOptions,
) -> ZTestOutcome {
    let tol = opts.degenerate_tol * base.mu.abs().max(1.0);
    if base.sigma <= tol {
        // no spread: any deviation in the tested direction is significant
        let dev = d - base.mu;
        let significant = match alternative {
            Alternative::Greater => dev > tol,
            Alternative::Less => dev < -tol,
            Alternative::TwoSided => dev.abs() > tol,
        };
        return ZTestOutcome {
            p_value: if significant { 0.0 } else { 1.0 },
            z: None,
            degenerate: true,
        };
    }
    let z = (d - base.mu) / base.sigma;
    let p = match alternative {
        Alternative::Greater => normal_sf(z),
        Alternative::Less => normal_cdf(z),
        Alternative::TwoSided => (2.0 * normal_sf(z.abs())).min(1.0),
    };
    ZTestOutcome {
        p_value: p,
        z: Some(z),
        degenerate: false,
    }
}
