//! Entropic transport in the log domain.
//!
//! Scalings are kept as log-potentials and combined through log-sum-exp, so
//! regularization down to 1e-3 works without overflow. A geometric
//! regularization warm start (epsilon scaling) cuts the iteration count at
//! small `reg`.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::ot::plan::{CouplingPlan, PlanEntry};
use crate::scalar::{kahan_sum, Scalar};

fn logsumexp<F: Scalar>(len: usize, mut f: impl FnMut(usize) -> F) -> F {
    let mut max = F::neg_infinity();
    for i in 0..len {
        max = max.max(f(i));
    }
    if !max.is_finite() {
        return max;
    }
    let mut sum = F::zero();
    for i in 0..len {
        sum += (f(i) - max).exp();
    }
    max + sum.ln()
}

/// Entropic-regularized transport plan between weight vectors `a` and `b`.
///
/// Iterates until the L1 marginal violation drops below `tol` or `max_iter`
/// is exhausted; the latter is reported through the plan's `converged` flag
/// rather than an error.
pub fn solve_sinkhorn<F: Scalar>(
    cost: &Array2<F>,
    a: &Array1<F>,
    b: &Array1<F>,
    reg: F,
    max_iter: usize,
    tol: F,
) -> Result<CouplingPlan<F>> {
    let (n, m) = cost.dim();
    if a.len() != n || b.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "cost is {n}x{m} but weights have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if !(reg > F::zero()) || !reg.is_finite() {
        return Err(Error::InvalidConfig(format!("sinkhorn reg must be positive, got {reg}")));
    }
    if !(tol > F::zero()) {
        return Err(Error::InvalidConfig(format!("sinkhorn tol must be positive, got {tol}")));
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
        return Err(Error::Infeasible(format!("total masses differ: {sum_a} vs {sum_b}")));
    }

    let log_a: Vec<F> =
        a.iter().map(|&x| if x > F::zero() { x.ln() } else { F::neg_infinity() }).collect();
    let log_b: Vec<F> =
        b.iter().map(|&x| if x > F::zero() { x.ln() } else { F::neg_infinity() }).collect();

    // f, g are log-scalings: P_ij = exp(f_i + g_j - c_ij / reg_current).
    let mut f = vec![F::zero(); n];
    let mut g = vec![F::zero(); m];

    // Epsilon-scaling warm start: a few sweeps at geometrically decreasing
    // regularization, then the full budget at the target value.
    let cost_scale = cost.iter().fold(F::zero(), |acc, &c| acc.max(c.abs())).max(reg);
    let mut levels = Vec::new();
    let mut cur = cost_scale;
    while cur > reg * F::cast(3.0) {
        levels.push(cur);
        cur = cur / F::cast(3.0);
    }
    levels.push(reg);

    let mut converged = false;
    for (li, &level) in levels.iter().enumerate() {
        let final_level = li + 1 == levels.len();
        let iters = if final_level { max_iter } else { 10 };
        // Rescale potentials when the temperature changes.
        if li > 0 {
            let prev = levels[li - 1];
            let ratio = prev / level;
            for fi in f.iter_mut() {
                *fi = *fi * ratio;
            }
            for gj in g.iter_mut() {
                *gj = *gj * ratio;
            }
        }
        for it in 0..iters {
            for i in 0..n {
                if log_a[i] == F::neg_infinity() {
                    f[i] = F::neg_infinity();
                    continue;
                }
                let lse = logsumexp(m, |j| g[j] - cost[[i, j]] / level);
                f[i] = log_a[i] - lse;
            }
            for j in 0..m {
                if log_b[j] == F::neg_infinity() {
                    g[j] = F::neg_infinity();
                    continue;
                }
                let lse = logsumexp(n, |i| f[i] - cost[[i, j]] / level);
                g[j] = log_b[j] - lse;
            }
            if final_level && (it % 10 == 9 || it + 1 == iters) {
                // After the g update, columns match exactly; measure rows.
                let mut violation = F::zero();
                for i in 0..n {
                    let row =
                        if f[i] == F::neg_infinity() {
                            F::zero()
                        } else {
                            (f[i] + logsumexp(m, |j| g[j] - cost[[i, j]] / level)).exp()
                        };
                    violation += (row - a[i]).abs();
                }
                if violation <= tol {
                    converged = true;
                    break;
                }
            }
        }
    }

    let mut entries = Vec::with_capacity(n * m);
    let mut cost_terms = Vec::with_capacity(n * m);
    for i in 0..n {
        for j in 0..m {
            if f[i] == F::neg_infinity() || g[j] == F::neg_infinity() {
                continue;
            }
            let mass = (f[i] + g[j] - cost[[i, j]] / reg).exp();
            entries.push(PlanEntry { row: i as u32, col: j as u32, mass });
            cost_terms.push(mass * cost[[i, j]]);
        }
    }
    let total_cost = kahan_sum(cost_terms);
    CouplingPlan::from_entries(entries, a.clone(), b.clone(), total_cost, converged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::exact::solve_exact;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_atom_is_trivial() {
        let plan =
            solve_sinkhorn::<f64>(&array![[3.0]], &array![1.0], &array![1.0], 0.5, 100, 1e-9)
                .unwrap();
        assert!((plan.to_dense()[[0, 0]] - 1.0).abs() < 1e-12);
        assert!(plan.converged());
    }

    #[test]
    fn small_reg_approaches_exact_plan() {
        let cost = array![[0.0, 1.0], [1.0, 0.0]];
        let a = array![0.5, 0.5];
        let plan = solve_sinkhorn::<f64>(&cost, &a, &a, 1e-3, 20_000, 1e-10).unwrap();
        let dense = plan.to_dense();
        assert!((dense[[0, 0]] - 0.5).abs() < 1e-3);
        assert!((dense[[0, 1]]).abs() < 1e-3);
        assert!(plan.converged());
    }

    #[test]
    fn marginal_violation_below_tol_on_random_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 16;
        let mut cost = Array2::<f64>::zeros((n, n));
        for x in cost.iter_mut() {
            *x = rng.random_range(0.0..4.0);
        }
        let mut a = Array1::<f64>::zeros(n);
        let mut b = Array1::<f64>::zeros(n);
        for i in 0..n {
            a[i] = rng.random_range(0.1..1.0);
            b[i] = rng.random_range(0.1..1.0);
        }
        let sa: f64 = a.sum();
        let sb: f64 = b.sum();
        a.mapv_inplace(|x| x / sa);
        b.mapv_inplace(|x| x / sb);
        let tol = 1e-8;
        let plan = solve_sinkhorn(&cost, &a, &b, 0.05, 50_000, tol).unwrap();
        assert!(plan.converged());
        let l1: f64 = plan
            .row_sums()
            .iter()
            .zip(a.iter())
            .map(|(s, m)| (s - m).abs())
            .chain(plan.col_sums().iter().zip(b.iter()).map(|(s, m)| (s - m).abs()))
            .sum();
        assert!(l1 <= 4.0 * tol, "L1 marginal violation {l1}");
        // entries strictly positive for positive weights
        assert!(plan.entries().iter().all(|e| e.mass > 0.0));
    }

    #[test]
    fn cost_dominates_exact_and_gap_shrinks_with_reg() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n = 8;
        let mut cost = Array2::<f64>::zeros((n, n));
        for x in cost.iter_mut() {
            *x = rng.random_range(0.0..2.0);
        }
        let a = Array1::from_elem(n, 1.0 / n as f64);
        let exact = solve_exact(&cost, &a, &a).unwrap().cost_value();
        let mut prev_gap = f64::INFINITY;
        for &reg in &[1.0, 0.1, 0.01] {
            let plan = solve_sinkhorn(&cost, &a, &a, reg, 100_000, 1e-10).unwrap();
            let gap = plan.cost_value() - exact;
            assert!(gap >= -1e-9, "sinkhorn cost below exact optimum: gap {gap}");
            assert!(gap <= prev_gap + 1e-12, "gap not shrinking: {gap} vs {prev_gap}");
            prev_gap = gap;
        }
        assert!(prev_gap < 1e-2);
    }

    #[test]
    fn rejects_bad_inputs() {
        let c = array![[0.0, 1.0], [1.0, 0.0]];
        let a = array![0.5, 0.5];
        assert!(solve_sinkhorn(&c, &a, &a, 0.0, 10, 1e-6).is_err());
        assert!(solve_sinkhorn(&c, &a, &a, 0.1, 10, 0.0).is_err());
        let bad = array![[f64::INFINITY, 1.0], [1.0, 0.0]];
        assert!(solve_sinkhorn(&bad, &a, &a, 0.1, 10, 1e-6).is_err());
    }

    #[test]
    fn reports_non_convergence_without_aborting() {
        let c = array![[0.0, 1.3], [0.7, 0.2]];
        let a = array![0.3, 0.7];
        let b = array![0.6, 0.4];
        // Tolerance no finite iteration count can meet: flag, don't error.
        let plan = solve_sinkhorn::<f64>(&c, &a, &b, 1e-2, 5, 1e-300).unwrap();
        assert!(!plan.converged());
        assert!(plan.cost_value().is_finite());
    }
}
