//! Conditional Wasserstein distances on discrete data, and the geodesics
//! they induce.
//!
//! The empirical estimator solves the ε-cost transport problem and accounts
//! the cost of the resulting plan on the U-coordinates only: as ε shrinks
//! the raw objective is dominated by the y-penalty, while the U-displacement
//! converges to the conditional cost. When atoms share y-values across the
//! two measures and ε is small against the y-gaps, the plan is exactly
//! triangular and the estimate is the exact conditional distance.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::ot::{cot_coupling_with_power, CouplingPlan, SolveMethod};
use crate::scalar::{kahan_sum, Scalar};

/// Everything the ε-plan estimator produces in one solve.
#[derive(Debug, Clone)]
pub struct CwEstimate<F> {
    /// (U-displacement cost)^{1/p}; the conditional W_p estimate.
    pub estimate: F,
    /// Σ plan_ij |u_j − u_i|^p under the computed plan.
    pub u_cost: F,
    /// The ε-cost optimum ⟨c_ε, plan⟩ reported by the solver.
    pub epsilon_cost: F,
    /// max |y_j − y_i| over supported pairs; zero means exactly triangular.
    pub y_slack: F,
}

/// Conditional W_p estimate between two discrete measures.
pub fn empirical_cw<F: Scalar>(
    src: &DiscreteMeasure<F>,
    tgt: &DiscreteMeasure<F>,
    p: u32,
    epsilon: F,
    method: SolveMethod<F>,
) -> Result<F> {
    Ok(empirical_cw_detailed(src, tgt, p, epsilon, method)?.estimate)
}

/// As [`empirical_cw`], reporting both cost accountings and the y-slack.
pub fn empirical_cw_detailed<F: Scalar>(
    src: &DiscreteMeasure<F>,
    tgt: &DiscreteMeasure<F>,
    p: u32,
    epsilon: F,
    method: SolveMethod<F>,
) -> Result<CwEstimate<F>> {
    let plan = cot_coupling_with_power(src, tgt, epsilon, p, method)?;
    let (u_cost, y_slack) = plan_u_cost(&plan, src, tgt, p);
    let estimate = if p == 1 { u_cost } else { u_cost.sqrt() };
    Ok(CwEstimate { estimate, u_cost, epsilon_cost: plan.cost_value(), y_slack })
}

/// U-only displacement cost of a plan plus the largest y-gap it supports.
pub fn plan_u_cost<F: Scalar>(
    plan: &CouplingPlan<F>,
    src: &DiscreteMeasure<F>,
    tgt: &DiscreteMeasure<F>,
    p: u32,
) -> (F, F) {
    let mut terms = Vec::with_capacity(plan.entries().len());
    let mut y_slack = F::zero();
    for e in plan.entries() {
        if !(e.mass > F::zero()) {
            continue;
        }
        let i = e.row as usize;
        let j = e.col as usize;
        let mut du2 = F::zero();
        for (a, b) in src.u(i).iter().zip(tgt.u(j).iter()) {
            let d = *b - *a;
            du2 += d * d;
        }
        let mut dy2 = F::zero();
        for (a, b) in src.y(i).iter().zip(tgt.y(j).iter()) {
            let d = *b - *a;
            dy2 += d * d;
        }
        y_slack = y_slack.max(dy2.sqrt());
        let cost = if p == 1 { du2.sqrt() } else { du2 };
        terms.push(e.mass * cost);
    }
    (kahan_sum(terms), y_slack)
}

/// A coupling between two measures together with the time grid along which
/// its linear interpolants are evaluated.
#[derive(Debug, Clone)]
pub struct InterpolantPath<F> {
    source: DiscreteMeasure<F>,
    target: DiscreteMeasure<F>,
    plan: CouplingPlan<F>,
    t_grid: Vec<F>,
    y_slack: F,
}

impl<F: Scalar> InterpolantPath<F> {
    pub fn new(
        source: DiscreteMeasure<F>,
        target: DiscreteMeasure<F>,
        plan: CouplingPlan<F>,
        t_grid: Vec<F>,
    ) -> Result<Self> {
        if !source.same_split(&target) {
            return Err(Error::DimensionMismatch("source/target splits differ".into()));
        }
        if plan.n_rows() != source.len() || plan.n_cols() != target.len() {
            return Err(Error::DimensionMismatch("plan shape does not match measures".into()));
        }
        plan.validate(F::cast(1e-6))?;
        if t_grid.iter().any(|&t| t < F::zero() || t > F::one() || !t.is_finite()) {
            return Err(Error::InvalidConfig("t_grid values must lie in [0, 1]".into()));
        }
        let (_, y_slack) = plan_u_cost(&plan, &source, &target, 2);
        Ok(Self { source, target, plan, t_grid, y_slack })
    }

    /// Couple with the ε-cost and wrap the result.
    pub fn from_cot(
        source: DiscreteMeasure<F>,
        target: DiscreteMeasure<F>,
        epsilon: F,
        method: SolveMethod<F>,
        t_grid: Vec<F>,
    ) -> Result<Self> {
        let plan = cot_coupling_with_power(&source, &target, epsilon, 2, method)?;
        Self::new(source, target, plan, t_grid)
    }

    pub fn source(&self) -> &DiscreteMeasure<F> {
        &self.source
    }

    pub fn target(&self) -> &DiscreteMeasure<F> {
        &self.target
    }

    pub fn plan(&self) -> &CouplingPlan<F> {
        &self.plan
    }

    pub fn t_grid(&self) -> &[F] {
        &self.t_grid
    }

    /// Largest |y₀ − y₁| over supported pairs of the coupling.
    pub fn y_slack(&self) -> F {
        self.y_slack
    }
}

/// Pushforward of the coupling through T_t = (1−t) I + t T*: each supported
/// pair moves to its linear interpolant carrying the pair's mass.
pub fn mccann_interpolate<F: Scalar>(
    path: &InterpolantPath<F>,
    t: F,
) -> Result<DiscreteMeasure<F>> {
    if t < F::zero() || t > F::one() || !t.is_finite() {
        return Err(Error::InvalidConfig(format!("interpolation time {t} outside [0, 1]")));
    }
    let dim = path.source.dim();
    let support: Vec<&crate::ot::PlanEntry<F>> =
        path.plan.entries().iter().filter(|e| e.mass > F::zero()).collect();
    if support.is_empty() {
        return Err(Error::Numeric("coupling has empty support".into()));
    }
    let mut pts = Array2::zeros((support.len(), dim));
    let mut w = Array1::zeros(support.len());
    let s = F::one() - t;
    for (row, e) in support.iter().enumerate() {
        let p0 = path.source.point(e.row as usize);
        let p1 = path.target.point(e.col as usize);
        for k in 0..dim {
            pts[[row, k]] = s * p0[k] + t * p1[k];
        }
        w[row] = e.mass;
    }
    // Plan masses sum to one up to solver tolerance; renormalize the last ulp.
    let total = kahan_sum(w.iter().copied());
    w.mapv_inplace(|x| x / total);
    DiscreteMeasure::new(pts, w, path.source.d_y(), path.source.d_u())
}

/// Velocities of the interpolating atoms: (0, u₁ − u₀) for each supported
/// pair, constant in t. Rows align with [`interpolant_support_masses`].
pub fn interpolant_velocity<F: Scalar>(path: &InterpolantPath<F>, t: F) -> Result<Array2<F>> {
    if t < F::zero() || t > F::one() || !t.is_finite() {
        return Err(Error::InvalidConfig(format!("interpolation time {t} outside [0, 1]")));
    }
    let dim = path.source.dim();
    let d_y = path.source.d_y();
    let support: Vec<&crate::ot::PlanEntry<F>> =
        path.plan.entries().iter().filter(|e| e.mass > F::zero()).collect();
    let mut vel = Array2::zeros((support.len(), dim));
    for (row, e) in support.iter().enumerate() {
        let u0 = path.source.u(e.row as usize);
        let u1 = path.target.u(e.col as usize);
        for k in 0..(dim - d_y) {
            vel[[row, d_y + k]] = u1[k] - u0[k];
        }
    }
    Ok(vel)
}

/// Masses of the supported pairs, aligned with [`interpolant_velocity`] rows.
pub fn interpolant_support_masses<F: Scalar>(path: &InterpolantPath<F>) -> Array1<F> {
    Array1::from_iter(
        path.plan.entries().iter().filter(|e| e.mass > F::zero()).map(|e| e.mass),
    )
}
