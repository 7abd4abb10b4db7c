//! Exact discrete optimal transport via the transportation simplex
//! (northwest-corner start, MODI potentials, cycle pivots).

use std::collections::VecDeque;

use ndarray::Array2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub cost: f64,
    pub flow: Array2<f64>,
}

const MASS_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 10_000;

/// Minimises `sum_ij flow[i][j] cost[i][j]` over couplings with row sums
/// `supply` and column sums `demand`.
pub fn solve_transport(
    supply: &[f64],
    demand: &[f64],
    cost: &Array2<f64>,
) -> Result<TransportPlan> {
    let (m, n) = (supply.len(), demand.len());
    if m == 0 || n == 0 {
        return Err(Error::Transport("empty marginal".into()));
    }
    if cost.dim() != (m, n) {
        return Err(Error::Transport(format!(
            "cost matrix is {:?}, marginals are {m} x {n}",
            cost.dim()
        )));
    }
    if supply
        .iter()
        .chain(demand)
        .any(|w| !(w.is_finite() && *w >= 0.0))
    {
        return Err(Error::Transport("marginals must be nonnegative".into()));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::Transport("costs must be finite".into()));
    }
    let total_a: f64 = supply.iter().sum();
    let total_b: f64 = demand.iter().sum();
    if (total_a - total_b).abs() > MASS_TOL * total_a.max(1.0) {
        return Err(Error::Transport(format!(
            "marginal masses differ: {total_a} vs {total_b}"
        )));
    }
    let mut a = supply.to_vec();
    let mut b: Vec<f64> = demand.iter().map(|w| w * total_a / total_b).collect();

    // Northwest corner: exactly m + n - 1 basic cells forming a spanning tree.
    let mut flow = Array2::<f64>::zeros((m, n));
    let mut basis: Vec<(usize, usize)> = Vec::with_capacity(m + n - 1);
    let (mut i, mut j) = (0, 0);
    loop {
        let x = a[i].min(b[j]);
        flow[[i, j]] = x;
        basis.push((i, j));
        a[i] -= x;
        b[j] -= x;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if (a[i] <= b[j] && i < m - 1) || j == n - 1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    debug_assert_eq!(basis.len(), m + n - 1);

    for _ in 0..MAX_PIVOTS {
        let (u, v) = potentials(m, n, &basis, cost);
        let mut entering: Option<(usize, usize, f64)> = None;
        for r in 0..m {
            for c in 0..n {
                let reduced = cost[[r, c]] - u[r] - v[c];
                if reduced < -1e-12 && entering.is_none_or(|e| reduced < e.2) {
                    entering = Some((r, c, reduced));
                }
            }
        }
        let Some((er, ec, _)) = entering else {
            let total = flow.iter().zip(cost.iter()).map(|(f, c)| f * c).sum();
            return Ok(TransportPlan { cost: total, flow });
        };
        let path = tree_path(m, n, &basis, ec, er);
        // path alternates: cells at odd positions lose flow.
        let mut theta = f64::INFINITY;
        let mut leave = usize::MAX;
        for (pos, &cell) in path.iter().enumerate() {
            if pos % 2 == 0 {
                let f = flow[[basis[cell].0, basis[cell].1]];
                if f < theta {
                    theta = f;
                    leave = cell;
                }
            }
        }
        for (pos, &cell) in path.iter().enumerate() {
            let (r, c) = basis[cell];
            if pos % 2 == 0 {
                flow[[r, c]] -= theta;
            } else {
                flow[[r, c]] += theta;
            }
        }
        flow[[er, ec]] += theta;
        let (lr, lc) = basis[leave];
        flow[[lr, lc]] = 0.0;
        basis[leave] = (er, ec);
    }
    Err(Error::Transport("pivot limit reached".into()))
}

fn potentials(
    m: usize,
    n: usize,
    basis: &[(usize, usize)],
    cost: &Array2<f64>,
) -> (Vec<f64>, Vec<f64>) {
    let mut u = vec![f64::NAN; m];
    let mut v = vec![f64::NAN; n];
    u[0] = 0.0;
    let mut changed = true;
    while changed {
        changed = false;
        for &(r, c) in basis {
            if !u[r].is_nan() && v[c].is_nan() {
                v[c] = cost[[r, c]] - u[r];
                changed = true;
            } else if u[r].is_nan() && !v[c].is_nan() {
                u[r] = cost[[r, c]] - v[c];
                changed = true;
            }
        }
    }
    (u, v)
}

/// Basis-cell indices along the tree path from column `col` to row `row`.
fn tree_path(m: usize, n: usize, basis: &[(usize, usize)], col: usize, row: usize) -> Vec<usize> {
    // Nodes: rows 0..m, columns m..m+n.
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); m + n];
    for (idx, &(r, c)) in basis.iter().enumerate() {
        adj[r].push((m + c, idx));
        adj[m + c].push((r, idx));
    }
    let start = m + col;
    let mut prev: Vec<Option<(usize, usize)>> = vec![None; m + n];
    let mut seen = vec![false; m + n];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(node) = queue.pop_front() {
        if node == row {
            break;
        }
        for &(next, idx) in &adj[node] {
            if !seen[next] {
                seen[next] = true;
                prev[next] = Some((node, idx));
                queue.push_back(next);
            }
        }
    }
    let mut path = Vec::new();
    let mut node = row;
    while node != start {
        let (p, idx) = prev[node].expect("basis is a spanning tree");
        path.push(idx);
        node = p;
    }
    path.reverse();
    path
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Brute-force LP oracle: enumerate every set of m + n - 1 cells, solve
    /// for the unique flow with the given marginals when it exists, keep the
    /// cheapest feasible vertex.
    fn vertex_enumeration(a: &[f64], b: &[f64], cost: &Array2<f64>) -> f64 {
        let (m, n) = (a.len(), b.len());
        let cells: Vec<(usize, usize)> = (0..m).flat_map(|r| (0..n).map(move |c| (r, c))).collect();
        let size = m + n - 1;
        let mut best = f64::INFINITY;
        let total = cells.len();
        let mut pick = vec![0usize; size];
        fn combos(
            start: usize,
            depth: usize,
            total: usize,
            pick: &mut Vec<usize>,
            f: &mut dyn FnMut(&[usize]),
        ) {
            if depth == pick.len() {
                f(pick);
                return;
            }
            for i in start..total {
                pick[depth] = i;
                combos(i + 1, depth + 1, total, pick, f);
            }
        }
        combos(0, 0, total, &mut pick, &mut |subset| {
            // Peel leaves: a row or column touched by one remaining cell fixes that cell.
            let mut ra = a.to_vec();
            let mut cb = b.to_vec();
            let mut left: Vec<(usize, usize)> = subset.iter().map(|&s| cells[s]).collect();
            let mut value = 0.0;
            let mut ok = true;
            while !left.is_empty() {
                let mut progressed = false;
                for idx in 0..left.len() {
                    let (r, c) = left[idx];
                    let row_deg = left.iter().filter(|x| x.0 == r).count();
                    let col_deg = left.iter().filter(|x| x.1 == c).count();
                    let x = if row_deg == 1 {
                        ra[r]
                    } else if col_deg == 1 {
                        cb[c]
                    } else {
                        continue;
                    };
                    if x < -1e-12 {
                        ok = false;
                    }
                    ra[r] -= x;
                    cb[c] -= x;
                    value += x * cost[[r, c]];
                    left.remove(idx);
                    progressed = true;
                    break;
                }
                if !progressed {
                    ok = false;
                    break;
                }
            }
            if ok && ra.iter().chain(&cb).all(|r| r.abs() < 1e-9) {
                best = best.min(value);
            }
        });
        best
    }

    #[test]
    fn two_by_two_closed_form() {
        let cost = array![[0.0, 1.0], [1.0, 0.0]];
        let plan = solve_transport(&[0.5, 0.5], &[0.7, 0.3], &cost).unwrap();
        assert_relative_eq!(plan.cost, 0.2, epsilon = 1e-15);
        let same = solve_transport(&[0.3, 0.7], &[0.3, 0.7], &cost).unwrap();
        assert_eq!(same.cost, 0.0);
    }

    #[test]
    fn single_atoms_use_the_only_coupling() {
        let plan = solve_transport(&[1.0], &[1.0], &array![[2.5]]).unwrap();
        assert_eq!(plan.cost, 2.5);
    }

    #[test]
    fn matches_vertex_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let m = rng.random_range(1..=4);
            let n = rng.random_range(1..=4);
            let mut a: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
            let mut b: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
            let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
            a.iter_mut().for_each(|x| *x /= sa);
            b.iter_mut().for_each(|x| *x /= sb);
            let cost = Array2::from_shape_fn((m, n), |_| rng.random_range(0.0..3.0));
            let plan = solve_transport(&a, &b, &cost).unwrap();
            let oracle = vertex_enumeration(&a, &b, &cost);
            assert_relative_eq!(plan.cost, oracle, epsilon = 1e-10);
            for r in 0..m {
                assert_relative_eq!(plan.flow.row(r).sum(), a[r], epsilon = 1e-12);
            }
            assert!(plan.flow.iter().all(|&f| f >= -1e-14));
        }
    }

    #[test]
    fn degenerate_marginals() {
        // Equal partial sums force degenerate northwest-corner steps.
        let a = [0.25, 0.25, 0.25, 0.25];
        let b = [0.5, 0.25, 0.25];
        let cost = array![
            [3.0, 1.0, 2.0],
            [1.0, 3.0, 1.0],
            [2.0, 2.0, 0.0],
            [0.0, 1.0, 4.0]
        ];
        let plan = solve_transport(&a, &b, &cost).unwrap();
        assert_relative_eq!(
            plan.cost,
            vertex_enumeration(&a, &b, &cost),
            epsilon = 1e-12
        );
    }

    #[test]
    fn line_transport_matches_cdf_formula() {
        let xs: [f64; 4] = [0.0, 1.0, 2.5, 4.0];
        let ys = [0.5, 3.0, 3.5];
        let a = [0.1, 0.4, 0.3, 0.2];
        let b = [0.5, 0.25, 0.25];
        let cost = Array2::from_shape_fn((4, 3), |(i, j)| (xs[i] - ys[j]).abs());
        let plan = solve_transport(&a, &b, &cost).unwrap();
        // W1 on the line = integral of |F - G|.
        let mut pts: Vec<f64> = xs.iter().chain(&ys).copied().collect();
        pts.sort_by(f64::total_cmp);
        let cdf = |locs: &[f64], w: &[f64], t: f64| -> f64 {
            locs.iter()
                .zip(w)
                .filter(|(l, _)| **l <= t)
                .map(|(_, w)| w)
                .sum()
        };
        let mut w1 = 0.0;
        for win in pts.windows(2) {
            w1 += (cdf(&xs, &a, win[0]) - cdf(&ys, &b, win[0])).abs() * (win[1] - win[0]);
        }
        assert_relative_eq!(plan.cost, w1, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let cost = array![[0.0, 1.0]];
        assert!(solve_transport(&[1.0], &[0.5, 0.6], &cost).is_err());
        assert!(solve_transport(&[1.0], &[1.0], &cost).is_err());
        assert!(solve_transport(&[], &[1.0], &cost).is_err());
    }
}
