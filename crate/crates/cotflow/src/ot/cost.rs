//! Ground costs between atoms of two measures on Y × U.
//!
//! Two kinds are supported: the plain product-space cost |Δz|^p, and the
//! relaxed triangular cost |Δy|^p + ε|Δu|^p whose optimal plans approach
//! triangular couplings as ε goes to zero. Mass transfer along Y is what the
//! ε-cost makes expensive.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::scalar::Scalar;

/// Which ground cost to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum CostKind<F> {
    /// |Δz|^p on the full product space.
    SquaredEuclidean,
    /// |Δy|^p + ε |Δu|^p, the conditional-transport relaxation.
    CotEpsilon { epsilon: F },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSpec<F> {
    pub kind: CostKind<F>,
    /// Transport power; 1 or 2.
    pub power: u32,
}

impl<F: Scalar> CostSpec<F> {
    pub fn squared_euclidean(power: u32) -> Result<Self> {
        let spec = Self { kind: CostKind::SquaredEuclidean, power };
        spec.validate()?;
        Ok(spec)
    }

    pub fn cot_epsilon(epsilon: F, power: u32) -> Result<Self> {
        let spec = Self { kind: CostKind::CotEpsilon { epsilon }, power };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.power != 1 && self.power != 2 {
            return Err(Error::InvalidConfig(format!(
                "cost power must be 1 or 2, got {}",
                self.power
            )));
        }
        if let CostKind::CotEpsilon { epsilon } = self.kind {
            if !(epsilon > F::zero()) || !epsilon.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "cot-epsilon cost needs epsilon > 0, got {epsilon}"
                )));
            }
        }
        Ok(())
    }

    /// Cost of moving one atom onto another. Summation order over
    /// coordinates is fixed, so entries are reproducible bit-for-bit.
    pub fn eval(&self, src: ArrayView1<'_, F>, tgt: ArrayView1<'_, F>, d_y: usize) -> F {
        let pow = |d2: F| -> F {
            // d2 is a squared norm; power 2 keeps it, power 1 takes the root.
            if self.power == 2 {
                d2
            } else {
                d2.sqrt()
            }
        };
        match self.kind {
            CostKind::SquaredEuclidean => {
                let mut d2 = F::zero();
                for (x, z) in src.iter().zip(tgt.iter()) {
                    let d = *z - *x;
                    d2 += d * d;
                }
                pow(d2)
            }
            CostKind::CotEpsilon { epsilon } => {
                let mut dy2 = F::zero();
                for k in 0..d_y {
                    let d = tgt[k] - src[k];
                    dy2 += d * d;
                }
                let mut du2 = F::zero();
                for k in d_y..src.len() {
                    let d = tgt[k] - src[k];
                    du2 += d * d;
                }
                pow(dy2) + epsilon * pow(du2)
            }
        }
    }
}

/// Dense cost matrix with entry (i, j) = cost(src_i → tgt_j).
pub fn cost_matrix<F: Scalar>(
    src: &DiscreteMeasure<F>,
    tgt: &DiscreteMeasure<F>,
    spec: &CostSpec<F>,
) -> Result<Array2<F>> {
    spec.validate()?;
    if !src.same_split(tgt) {
        return Err(Error::DimensionMismatch(format!(
            "source split ({}, {}) differs from target split ({}, {})",
            src.d_y(),
            src.d_u(),
            tgt.d_y(),
            tgt.d_u()
        )));
    }
    let n = src.len();
    let m = tgt.len();
    let d_y = src.d_y();
    let mut cost = Array2::zeros((n, m));
    for i in 0..n {
        let si = src.point(i);
        for j in 0..m {
            cost[[i, j]] = spec.eval(si, tgt.point(j), d_y);
        }
    }
    Ok(cost)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn atom(y: f64, u: f64) -> DiscreteMeasure<f64> {
        DiscreteMeasure::uniform(array![[y, u]], 1, 1).unwrap()
    }

    #[test]
    fn cot_cost_hand_values() {
        let spec = CostSpec::cot_epsilon(0.01, 2).unwrap();
        // pure u move
        let c = cost_matrix(&atom(0.0, 0.0), &atom(0.0, 1.0), &spec).unwrap();
        assert_eq!(c[[0, 0]], 0.01);
        // identical points
        let c = cost_matrix(&atom(0.0, 5.0), &atom(0.0, 5.0), &spec).unwrap();
        assert_eq!(c[[0, 0]], 0.0);
        // pure y move
        let c = cost_matrix(&atom(0.0, 5.0), &atom(1.0, 5.0), &spec).unwrap();
        assert_eq!(c[[0, 0]], 1.0);
    }

    #[test]
    fn squared_euclidean_matches_norm() {
        let spec = CostSpec::squared_euclidean(2).unwrap();
        let c = cost_matrix(&atom(0.0, 0.0), &atom(3.0, 4.0), &spec).unwrap();
        assert_eq!(c[[0, 0]], 25.0);
        let spec1 = CostSpec::squared_euclidean(1).unwrap();
        let c = cost_matrix(&atom(0.0, 0.0), &atom(3.0, 4.0), &spec1).unwrap();
        assert_eq!(c[[0, 0]], 5.0);
    }

    #[test]
    fn symmetric_on_shared_support() {
        let pts = array![[0.0, 1.0], [2.0, -1.0], [0.5, 0.25]];
        let m = DiscreteMeasure::uniform(pts, 1, 1).unwrap();
        let spec = CostSpec::cot_epsilon(0.3, 2).unwrap();
        let c = cost_matrix(&m, &m, &spec).unwrap();
        for i in 0..3 {
            assert_eq!(c[[i, i]], 0.0);
            for j in 0..3 {
                assert_eq!(c[[i, j]], c[[j, i]]);
            }
        }
    }

    #[test]
    fn rejects_bad_epsilon_and_split() {
        assert!(CostSpec::cot_epsilon(0.0, 2).is_err());
        assert!(CostSpec::cot_epsilon(-1.0, 2).is_err());
        assert!(CostSpec::<f64>::squared_euclidean(3).is_err());
        let a = atom(0.0, 0.0);
        let b = DiscreteMeasure::uniform(array![[0.0, 0.0, 0.0]], 2, 1).unwrap();
        let spec = CostSpec::squared_euclidean(2).unwrap();
        assert!(cost_matrix(&a, &b, &spec).is_err());
    }

    #[test]
    fn epsilon_monotone_pointwise() {
        let src = atom(0.0, 2.0);
        let tgt = atom(1.0, -1.0);
        let mut prev = -1.0;
        for &eps in &[1e-6, 1e-3, 1e-1, 1.0] {
            let spec = CostSpec::cot_epsilon(eps, 2).unwrap();
            let c = cost_matrix(&src, &tgt, &spec).unwrap()[[0, 0]];
            assert!(c >= prev);
            prev = c;
        }
    }
}
