//! Discrete optimal transport: ground costs, exact and entropic solvers,
//! and the ε-cost coupling used to pair training minibatches.

mod cost;
mod exact;
mod plan;
mod sinkhorn;

pub use cost::{cost_matrix, CostKind, CostSpec};
pub use exact::{solve_assignment, solve_exact};
pub use plan::{CouplingPlan, PlanEntry};
pub use sinkhorn::solve_sinkhorn;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::measure::DiscreteMeasure;
use crate::scalar::Scalar;

/// Which transport solver to run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "solver")]
pub enum SolveMethod<F> {
    Exact,
    Sinkhorn { reg: F, max_iter: usize, tol: F },
}

impl<F: Scalar> SolveMethod<F> {
    /// Entropic solver with the iteration budget used throughout the crate.
    pub fn sinkhorn(reg: F) -> Self {
        SolveMethod::Sinkhorn { reg, max_iter: 10_000, tol: F::cast(1e-8) }
    }
}

/// Coupling under the relaxed triangular cost |Δy|² + ε|Δu|².
///
/// As ε decreases the optimal plan concentrates on pairs with (near-)equal
/// y, recovering per-y conditional transport when y-atoms repeat.
pub fn cot_coupling<F: Scalar>(
    src: &DiscreteMeasure<F>,
    tgt: &DiscreteMeasure<F>,
    epsilon: F,
    method: SolveMethod<F>,
) -> Result<CouplingPlan<F>> {
    cot_coupling_with_power(src, tgt, epsilon, 2, method)
}

/// Same as [`cot_coupling`] with an explicit transport power (1 or 2).
pub fn cot_coupling_with_power<F: Scalar>(
    src: &DiscreteMeasure<F>,
    tgt: &DiscreteMeasure<F>,
    epsilon: F,
    power: u32,
    method: SolveMethod<F>,
) -> Result<CouplingPlan<F>> {
    let spec = CostSpec::cot_epsilon(epsilon, power)?;
    let cost = cost_matrix(src, tgt, &spec)?;
    match method {
        SolveMethod::Exact => {
            solve_exact(&cost, &src.weights().to_owned(), &tgt.weights().to_owned())
        }
        SolveMethod::Sinkhorn { reg, max_iter, tol } => solve_sinkhorn(
            &cost,
            &src.weights().to_owned(),
            &tgt.weights().to_owned(),
            reg,
            max_iter,
            tol,
        ),
    }
}
