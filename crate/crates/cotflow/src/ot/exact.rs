//! Exact discrete transport.
//!
//! Uniform equal-size problems reduce to an assignment and are solved with a
//! Jonker-Volgenant shortest-augmenting-path solver (fast enough for the
//! 5000-point evaluation sets). Everything else goes through a successive
//! shortest path min-cost flow on the bipartite graph, which handles
//! arbitrary weights at desk scale. Both return vertex solutions of the
//! transportation polytope, so plans are sparse.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::ot::plan::{CouplingPlan, PlanEntry};
use crate::scalar::{kahan_sum, Scalar};

/// Size guard for the general flow solver (dense flow state).
const GENERAL_CELL_LIMIT: usize = 1 << 22;
/// Size guard for the assignment path, which only needs O(n) extra state.
const ASSIGNMENT_CELL_LIMIT: usize = 1 << 26;

/// Exact minimizer of ⟨cost, plan⟩ over couplings of `a` and `b`.
pub fn solve_exact<F: Scalar>(
    cost: &Array2<F>,
    a: &Array1<F>,
    b: &Array1<F>,
) -> Result<CouplingPlan<F>> {
    let (n, m) = cost.dim();
    if a.len() != n || b.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "cost is {n}x{m} but weights have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if n == 0 || m == 0 {
        return Err(Error::InvalidMeasure("empty weight vector".into()));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("cost matrix".into()));
    }
    if a.iter().chain(b.iter()).any(|w| !w.is_finite() || *w < F::zero()) {
        return Err(Error::InvalidMeasure("weights must be finite and nonnegative".into()));
    }
    let sum_a = kahan_sum(a.iter().copied());
    let sum_b = kahan_sum(b.iter().copied());
    if (sum_a - sum_b).abs() > F::cast(1e-9) {
        return Err(Error::Infeasible(format!(
            "total masses differ: {sum_a} vs {sum_b}"
        )));
    }

    let uniform = n == m && is_uniform(a) && is_uniform(b);
    if uniform {
        if n * m > ASSIGNMENT_CELL_LIMIT {
            return Err(Error::InvalidConfig(format!(
                "assignment problem with {n}x{m} cells exceeds the desk-scale guard"
            )));
        }
        let assignment = solve_assignment(cost)?;
        let mut cost_terms = Vec::with_capacity(n);
        let entries = assignment
            .iter()
            .enumerate()
            .map(|(i, &j)| {
                cost_terms.push(cost[[i, j]] * a[i]);
                PlanEntry { row: i as u32, col: j as u32, mass: a[i] }
            })
            .collect();
        let total = kahan_sum(cost_terms);
        CouplingPlan::from_entries(entries, a.clone(), b.clone(), total, true)
    } else {
        if n * m > GENERAL_CELL_LIMIT {
            return Err(Error::InvalidConfig(format!(
                "transport problem with {n}x{m} cells exceeds the desk-scale guard"
            )));
        }
        let triplets = solve_general(cost, a, b)?;
        let total = kahan_sum(triplets.iter().map(|&(i, j, f)| cost[[i, j]] * f));
        let entries = triplets
            .into_iter()
            .map(|(i, j, f)| PlanEntry { row: i as u32, col: j as u32, mass: f })
            .collect();
        CouplingPlan::from_entries(entries, a.clone(), b.clone(), total, true)
    }
}

fn is_uniform<F: Scalar>(w: &Array1<F>) -> bool {
    let n = w.len();
    let target = F::one() / F::cast_usize(n);
    let tol = target * F::cast(1e-9);
    w.iter().all(|&x| (x - target).abs() <= tol)
}

/// Jonker-Volgenant dense assignment: returns the column assigned to each
/// row of a square cost matrix, minimizing the total cost. Ties resolve to
/// the lowest column index scanned first.
pub fn solve_assignment<F: Scalar>(c: &Array2<F>) -> Result<Vec<usize>> {
    let n = c.nrows();
    if c.ncols() != n {
        return Err(Error::DimensionMismatch("assignment needs a square cost matrix".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let big = F::max_value();
    let mut row_sol: Vec<isize> = vec![-1; n];
    let mut col_sol: Vec<isize> = vec![-1; n];
    let mut v = vec![F::zero(); n];
    let mut matches = vec![0usize; n];

    // Column reduction, scanning columns in reverse.
    for j in (0..n).rev() {
        let mut min = c[[0, j]];
        let mut imin = 0usize;
        for i in 1..n {
            if c[[i, j]] < min {
                min = c[[i, j]];
                imin = i;
            }
        }
        v[j] = min;
        matches[imin] += 1;
        if matches[imin] == 1 {
            row_sol[imin] = j as isize;
            col_sol[j] = imin as isize;
        }
    }

    // Reduction transfer from rows assigned exactly once.
    let mut free: Vec<usize> = Vec::new();
    for i in 0..n {
        if matches[i] == 0 {
            free.push(i);
        } else if matches[i] == 1 {
            let j1 = row_sol[i] as usize;
            let mut min = big;
            for j in 0..n {
                if j != j1 {
                    let r = c[[i, j]] - v[j];
                    if r < min {
                        min = r;
                    }
                }
            }
            if min < big {
                v[j1] = v[j1] - min;
            }
        }
    }

    // Augmenting row reduction, two passes. A guard bounds the re-processing
    // loop; rows it gives up on fall through to exact augmentation below.
    for _pass in 0..2 {
        if free.is_empty() {
            break;
        }
        let mut queue = std::mem::take(&mut free);
        let mut k = 0usize;
        let mut guard = 0usize;
        let guard_max = 32 * n + 64;
        while k < queue.len() {
            guard += 1;
            if guard > guard_max {
                free.extend_from_slice(&queue[k..]);
                break;
            }
            let i = queue[k];
            k += 1;
            let mut umin = c[[i, 0]] - v[0];
            let mut j1 = 0usize;
            let mut usubmin = big;
            let mut j2 = 0usize;
            for j in 1..n {
                let h = c[[i, j]] - v[j];
                if h < usubmin {
                    if h >= umin {
                        usubmin = h;
                        j2 = j;
                    } else {
                        usubmin = umin;
                        j2 = j1;
                        umin = h;
                        j1 = j;
                    }
                }
            }
            let mut jbest = j1;
            let mut displaced = col_sol[j1];
            if umin < usubmin {
                v[j1] = v[j1] - (usubmin - umin);
            } else if displaced >= 0 {
                jbest = j2;
                displaced = col_sol[j2];
            }
            row_sol[i] = jbest as isize;
            col_sol[jbest] = i as isize;
            if displaced >= 0 {
                if umin < usubmin {
                    k -= 1;
                    queue[k] = displaced as usize;
                } else {
                    free.push(displaced as usize);
                }
            }
        }
    }

    // Augmentation: shortest alternating path (dense Dijkstra) per free row.
    let mut d = vec![F::zero(); n];
    let mut pred = vec![0usize; n];
    let mut col_list: Vec<usize> = (0..n).collect();
    for f in 0..free.len() {
        let free_row = free[f];
        for j in 0..n {
            d[j] = c[[free_row, j]] - v[j];
            pred[j] = free_row;
            col_list[j] = j;
        }
        let mut low = 0usize;
        let mut up = 0usize;
        let mut last: isize = -1;
        let mut min = F::zero();
        let mut endofpath = 0usize;
        let mut found = false;
        while !found {
            if up == low {
                last = low as isize - 1;
                min = d[col_list[up]];
                up += 1;
                for k in up..n {
                    let j = col_list[k];
                    let h = d[j];
                    if h <= min {
                        if h < min {
                            up = low;
                            min = h;
                        }
                        col_list[k] = col_list[up];
                        col_list[up] = j;
                        up += 1;
                    }
                }
                for k in low..up {
                    let j = col_list[k];
                    if col_sol[j] < 0 {
                        endofpath = j;
                        found = true;
                        break;
                    }
                }
            }
            if !found {
                let j1 = col_list[low];
                low += 1;
                let i = col_sol[j1] as usize;
                let h = c[[i, j1]] - v[j1] - min;
                for k in up..n {
                    let j = col_list[k];
                    let v2 = c[[i, j]] - v[j] - h;
                    if v2 < d[j] {
                        d[j] = v2;
                        pred[j] = i;
                        if v2 == min {
                            if col_sol[j] < 0 {
                                endofpath = j;
                                found = true;
                                break;
                            }
                            col_list[k] = col_list[up];
                            col_list[up] = j;
                            up += 1;
                        }
                    }
                }
            }
        }
        for k in 0..=last {
            let j1 = col_list[k as usize];
            v[j1] = v[j1] + d[j1] - min;
        }
        // Flip assignments back along the alternating path.
        let mut j = endofpath;
        loop {
            let i = pred[j];
            col_sol[j] = i as isize;
            let next = row_sol[i];
            row_sol[i] = j as isize;
            if i == free_row {
                break;
            }
            j = next as usize;
        }
    }

    Ok(row_sol.into_iter().map(|j| j as usize).collect())
}

/// Successive shortest path min-cost flow for general marginals.
/// Returns (row, col, mass) triplets of a vertex solution.
fn solve_general<F: Scalar>(
    cost: &Array2<F>,
    a: &Array1<F>,
    b: &Array1<F>,
) -> Result<Vec<(usize, usize, F)>> {
    let n = a.len();
    let m = b.len();
    let total = kahan_sum(a.iter().copied());
    // Scale demands so supply and demand agree to machine precision.
    let sum_b = kahan_sum(b.iter().copied());
    let scale = total / sum_b;
    let mut a_res: Vec<F> = a.to_vec();
    let mut b_res: Vec<F> = b.iter().map(|&x| x * scale).collect();
    let nodes = n + m;
    let mut flow = Array2::<F>::zeros((n, m));
    let mut phi = vec![F::zero(); nodes];

    let done_tol = total * F::cast(1e-14);
    let big = F::max_value();
    let max_rounds = 8 * (n + 1) * (m + 1);

    let mut dist = vec![F::zero(); nodes];
    let mut prev = vec![usize::MAX; nodes];
    let mut done = vec![false; nodes];

    for _round in 0..max_rounds {
        if a_res.iter().all(|&r| r <= done_tol) || b_res.iter().all(|&r| r <= done_tol) {
            break;
        }
        // Dense Dijkstra from all supply rows under reduced costs.
        for x in 0..nodes {
            dist[x] = big;
            prev[x] = usize::MAX;
            done[x] = false;
        }
        for i in 0..n {
            if a_res[i] > done_tol {
                dist[i] = F::zero();
            }
        }
        let mut target = usize::MAX;
        loop {
            let mut best = big;
            let mut node = usize::MAX;
            for x in 0..nodes {
                if !done[x] && dist[x] < best {
                    best = dist[x];
                    node = x;
                }
            }
            if node == usize::MAX {
                break;
            }
            done[node] = true;
            if node >= n && b_res[node - n] > done_tol {
                target = node;
                break;
            }
            if node < n {
                let i = node;
                for j in 0..m {
                    let col = n + j;
                    if done[col] {
                        continue;
                    }
                    let rc = cost[[i, j]] + phi[i] - phi[col];
                    let cand = dist[i] + rc.max(F::zero());
                    if cand < dist[col] {
                        dist[col] = cand;
                        prev[col] = i;
                    }
                }
            } else {
                let j = node - n;
                for i in 0..n {
                    if done[i] || !(flow[[i, j]] > F::zero()) {
                        continue;
                    }
                    let rc = -cost[[i, j]] + phi[node] - phi[i];
                    let cand = dist[node] + rc.max(F::zero());
                    if cand < dist[i] {
                        dist[i] = cand;
                        prev[i] = node;
                    }
                }
            }
        }
        if target == usize::MAX {
            // Residual demand below tolerance everywhere reachable; the
            // leftover supply (a few ulps) is parked below.
            break;
        }

        // Bottleneck along the path back to a supply row.
        let t_col = target - n;
        let mut delta = b_res[t_col];
        let mut x = target;
        let source = loop {
            let p = prev[x];
            if p == usize::MAX {
                break x;
            }
            if p >= n {
                // backward arc (x is a row): bounded by existing flow
                delta = delta.min(flow[[x, p - n]]);
            }
            x = p;
        };
        delta = delta.min(a_res[source]);
        if !(delta > F::zero()) {
            return Err(Error::Numeric("min-cost flow stalled with zero augmentation".into()));
        }

        // Apply the augmentation.
        let mut x = target;
        loop {
            let p = prev[x];
            if p == usize::MAX {
                break;
            }
            if p < n {
                flow[[p, x - n]] += delta;
            } else {
                flow[[x, p - n]] -= delta;
            }
            x = p;
        }
        a_res[source] -= delta;
        b_res[t_col] -= delta;

        // Potential update keeps reduced costs nonnegative.
        let dt = dist[target];
        for x in 0..nodes {
            phi[x] += dist[x].min(dt);
        }
    }

    // Park any residue left by rounding on the cheapest arc of its row.
    for i in 0..n {
        if a_res[i] > F::zero() {
            let mut jbest = 0usize;
            for j in 1..m {
                if cost[[i, j]] < cost[[i, jbest]] {
                    jbest = j;
                }
            }
            flow[[i, jbest]] += a_res[i];
            a_res[i] = F::zero();
        }
    }

    let mut triplets = Vec::new();
    for i in 0..n {
        for j in 0..m {
            if flow[[i, j]] > F::zero() {
                triplets.push((i, j, flow[[i, j]]));
            }
        }
    }
    Ok(triplets)
}
