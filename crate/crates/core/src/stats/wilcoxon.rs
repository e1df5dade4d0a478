//! Wilcoxon signed-rank test for paired samples.

use serde::{Deserialize, Serialize};

use super::normal::{normal_cdf, normal_sf, Alternative};
use super::StatsError;

/// Largest effective sample size evaluated by exact enumeration.
pub const EXACT_MAX_N: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    pub p_value: f64,
    /// Sum of the ranks of positive differences `y - x`.
    pub w_plus: f64,
    /// Pairs left after dropping zero differences.
    pub n_effective: usize,
    pub method: WilcoxonMethod,
    /// Every difference was zero; `p_value` is 1.
    pub no_signal: bool,
    pub has_ties: bool,
}

/// Mid-ranks (1-based) of `v`, ties sharing their average rank.
pub fn midranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && v[order[j]] == v[order[i]] {
            j += 1;
        }
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// Tests the paired differences `y - x` for a location shift.
///
/// `Greater` means `y` tends to exceed `x`. Zero differences are dropped.
/// Up to [`EXACT_MAX_N`] pairs the null distribution is enumerated exactly,
/// ties included; above that a normal approximation with tie and continuity
/// corrections is used.
pub fn wilcoxon_signed_rank(
    x: &[f64],
    y: &[f64],
    alternative: Alternative,
) -> Result<WilcoxonResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(StatsError::Empty);
    }
    let diffs: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| b - a)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let n = diffs.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            p_value: 1.0,
            w_plus: 0.0,
            n_effective: 0,
            method: WilcoxonMethod::Exact,
            no_signal: true,
            has_ties: false,
        });
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = midranks(&abs);
    let w_plus: f64 = ranks
        .iter()
        .zip(&diffs)
        .filter(|(_, d)| **d > 0.0)
        .map(|(r, _)| r)
        .sum();
    let mut sorted = abs.clone();
    sorted.sort_by(f64::total_cmp);
    let tie_sizes: Vec<f64> = sorted
        .chunk_by(|a, b| a == b)
        .map(|c| c.len() as f64)
        .collect();
    let has_ties = tie_sizes.iter().any(|&t| t > 1.0);

    let (p_value, method) = if n <= EXACT_MAX_N {
        (exact_p(&ranks, w_plus, alternative), WilcoxonMethod::Exact)
    } else {
        (
            normal_p(n, &tie_sizes, w_plus, alternative),
            WilcoxonMethod::Normal,
        )
    };
    Ok(WilcoxonResult {
        p_value: p_value.clamp(0.0, 1.0),
        w_plus,
        n_effective: n,
        method,
        no_signal: false,
        has_ties,
    })
}

fn exact_p(ranks: &[f64], w_plus: f64, alternative: Alternative) -> f64 {
    // mid-ranks are multiples of 1/2, so doubled ranks are integers
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut count = vec![0.0f64; total + 1];
    count[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if count[s] != 0.0 {
                count[s + r] += count[s];
            }
        }
        reach += r;
    }
    let all = 2f64.powi(ranks.len() as i32);
    let obs = (2.0 * w_plus).round() as usize;
    let upper = count[obs..].iter().sum::<f64>() / all;
    let lower = count[..=obs].iter().sum::<f64>() / all;
    match alternative {
        Alternative::Greater => upper,
        Alternative::Less => lower,
        Alternative::TwoSided => (2.0 * upper.min(lower)).min(1.0),
    }
}

fn normal_p(n: usize, tie_sizes: &[f64], w_plus: f64, alternative: Alternative) -> f64 {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = tie_sizes.iter().map(|t| t * t * t - t).sum::<f64>() / 48.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
    if var <= 0.0 {
        return 1.0;
    }
    let sd = var.sqrt();
    let dev = w_plus - mean;
    match alternative {
        Alternative::Greater => normal_sf((dev - 0.5) / sd),
        Alternative::Less => normal_cdf((dev + 0.5) / sd),
        Alternative::TwoSided => {
            let z = ((dev.abs() - 0.5).max(0.0)) / sd;
            (2.0 * normal_sf(z)).min(1.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Proportion of the 2^n sign flips of the mid-ranks whose positive rank
    /// sum is at least (or at most) the observed one.
    fn brute_force(x: &[f64], y: &[f64], alternative: Alternative) -> f64 {
        let diffs: Vec<f64> = x
            .iter()
            .zip(y)
            .map(|(a, b)| b - a)
            .filter(|d| *d != 0.0)
            .collect();
        if diffs.is_empty() {
            return 1.0;
        }
        let ranks = midranks(&diffs.iter().map(|d| d.abs()).collect::<Vec<_>>());
        let obs: f64 = ranks
            .iter()
            .zip(&diffs)
            .filter(|(_, d)| **d > 0.0)
            .map(|(r, _)| r)
            .sum();
        let n = ranks.len();
        let (mut ge, mut le) = (0u64, 0u64);
        for mask in 0u64..(1 << n) {
            let w: f64 = (0..n)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| ranks[i])
                .sum();
            if w >= obs - 1e-9 {
                ge += 1;
            }
            if w <= obs + 1e-9 {
                le += 1;
            }
        }
        let all = (1u64 << n) as f64;
        let (up, lo) = (ge as f64 / all, le as f64 / all);
        match alternative {
            Alternative::Greater => up,
            Alternative::Less => lo,
            Alternative::TwoSided => (2.0 * up.min(lo)).min(1.0),
        }
    }

    #[test]
    fn all_positive_five() {
        let x = [0.0; 5];
        let y = [1.0, 2.0, 3.0, 4.0, 5.0];
        let r = wilcoxon_signed_rank(&x, &y, Alternative::Greater).unwrap();
        assert_eq!(r.p_value, 1.0 / 32.0);
        assert_eq!(r.w_plus, 15.0);
    }

    #[test]
    fn six_with_one_negative() {
        let x = [0.0; 6];
        let y = [1.0, 2.0, 3.0, 4.0, 5.0, -6.0];
        let r = wilcoxon_signed_rank(&x, &y, Alternative::Greater).unwrap();
        assert_eq!(r.p_value, brute_force(&x, &y, Alternative::Greater));
        // W+ = 15 of 21: the complement sums to at most 6 in 14 of 64 subsets
        assert_eq!(r.p_value, 14.0 / 64.0);
    }

    #[test]
    fn identical_samples_carry_no_signal() {
        let x = [0.3, 0.1, 0.9];
        let r = wilcoxon_signed_rank(&x, &x, Alternative::TwoSided).unwrap();
        assert!(r.no_signal);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn midranks_average_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn large_samples_use_the_approximation() {
        let x = vec![0.0; 40];
        let y: Vec<f64> = (1..=40).map(|i| -(i as f64)).collect();
        let r = wilcoxon_signed_rank(&x, &y, Alternative::Less).unwrap();
        assert_eq!(r.method, WilcoxonMethod::Normal);
        assert!(r.p_value < 1e-7);
    }

    #[test]
    fn rejects_unpaired_input() {
        assert!(wilcoxon_signed_rank(&[1.0], &[1.0, 2.0], Alternative::Greater).is_err());
        assert!(wilcoxon_signed_rank(&[], &[], Alternative::Greater).is_err());
    }

    proptest! {
        #[test]
        fn exact_matches_enumeration(
            pairs in prop::collection::vec((-4i32..=4, -4i32..=4), 1..=10),
            alt in prop::sample::select(vec![Alternative::Greater, Alternative::Less, Alternative::TwoSided]),
        ) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
            let r = wilcoxon_signed_rank(&x, &y, alt).unwrap();
            prop_assert!((r.p_value - brute_force(&x, &y, alt)).abs() < 1e-12);
        }

        #[test]
        fn two_sided_is_symmetric(pairs in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..30)) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let a = wilcoxon_signed_rank(&x, &y, Alternative::TwoSided).unwrap().p_value;
            let b = wilcoxon_signed_rank(&y, &x, Alternative::TwoSided).unwrap().p_value;
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
