//! Minimum-cost assignment (Hungarian method with row/column potentials).

use super::MetricError;
use crate::scalar::Scalar;

/// Optimal assignment of a rectangular cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment<S> {
    /// `columns[i]` is the column assigned to row `i`.
    pub columns: Vec<usize>,
    pub total_cost: S,
}

/// Solves `min sum_i cost[i][columns[i]]` over injective row-to-column maps.
///
/// `cost` is row-major with `rows <= cols`. Runs in O(rows^2 * cols).
pub fn solve_assignment<S: Scalar>(
    cost: &[S],
    rows: usize,
    cols: usize,
) -> Result<Assignment<S>, MetricError> {
    if rows == 0 {
        return Ok(Assignment {
            columns: Vec::new(),
            total_cost: S::zero(),
        });
    }
    if rows > cols {
        return Err(MetricError::Shape(format!(
            "assignment needs rows <= cols, got {rows}x{cols}"
        )));
    }
    if cost.len() != rows * cols {
        return Err(MetricError::Shape(format!(
            "cost matrix has {} entries, expected {}",
            cost.len(),
            rows * cols
        )));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(MetricError::NonFinite);
    }

    let inf = S::infinity();
    let at = |i: usize, j: usize| cost[(i - 1) * cols + (j - 1)];
    // 1-based: index 0 is the virtual column / unassigned row
    let mut u = vec![S::zero(); rows + 1];
    let mut v = vec![S::zero(); cols + 1];
    let mut owner = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];

    for i in 1..=rows {
        owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let cur = at(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[owner[j]] = u[owner[j]] + delta;
                    v[j] = v[j] - delta;
                } else {
                    minv[j] = minv[j] - delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut columns = vec![0usize; rows];
    for j in 1..=cols {
        if owner[j] != 0 {
            columns[owner[j] - 1] = j - 1;
        }
    }
    // summed from the original entries, not the potentials, to avoid drift
    let total_cost = columns
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i * cols + j])
        .fold(S::zero(), |a, b| a + b);
    Ok(Assignment {
        columns,
        total_cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(cost: &[f64], n: usize) -> f64 {
        fn rec(cost: &[f64], n: usize, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if row == n {
                *best = best.min(acc);
                return;
            }
            for j in 0..n {
                if !used[j] {
                    used[j] = true;
                    rec(cost, n, row + 1, used, acc + cost[row * n + j], best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(cost, n, 0, &mut vec![false; n], 0.0, &mut best);
        best
    }

    #[test]
    fn small_known_instance() {
        let cost = [4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0];
        let a = solve_assignment(&cost, 3, 3).unwrap();
        assert_eq!(a.total_cost, 5.0);
        let mut cols = a.columns.clone();
        cols.sort_unstable();
        assert_eq!(cols, vec![0, 1, 2]);
    }

    #[test]
    fn rectangular_picks_cheapest_columns() {
        let cost = [5.0, 1.0, 9.0, 9.0, 9.0, 2.0];
        let a = solve_assignment(&cost, 2, 3).unwrap();
        assert_eq!(a.columns, vec![1, 2]);
        assert_eq!(a.total_cost, 3.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(solve_assignment(&[1.0f64, 2.0], 2, 1).is_err());
        assert!(matches!(
            solve_assignment(&[f64::NAN], 1, 1),
            Err(MetricError::NonFinite)
        ));
    }

    proptest! {
        #[test]
        fn matches_permutation_enumeration(n in 1usize..=7, seed in prop::collection::vec(0.0f64..100.0, 49)) {
            let cost: Vec<f64> = seed[..n * n].to_vec();
            let a = solve_assignment(&cost, n, n).unwrap();
            let best = brute_force(&cost, n);
            prop_assert!((a.total_cost - best).abs() <= 1e-9 * best.max(1.0));
        }

        #[test]
        fn f32_instances_match_enumeration(n in 1usize..=6, seed in prop::collection::vec(0u8..50, 36)) {
            let cost: Vec<f32> = seed[..n * n].iter().map(|&c| c as f32).collect();
            let a = solve_assignment(&cost, n, n).unwrap();
            let as64: Vec<f64> = cost.iter().map(|&c| c as f64).collect();
            prop_assert_eq!(a.total_cost as f64, brute_force(&as64, n));
        }
    }
}
