//! Transport plans between two discrete measures.
//!
//! Plans are stored as sparse (row, col, mass) triplets: exact plans carry at
//! most n + m - 1 entries, and the entropic solver's dense plans fit the same
//! representation. Dense exports are available for the JSON interface.

use std::io::Write;

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::{kahan_sum, Scalar};

#[derive(Debug, Clone, Copy)]
pub struct PlanEntry<F> {
    pub row: u32,
    pub col: u32,
    pub mass: F,
}

#[derive(Debug, Clone)]
pub struct CouplingPlan<F> {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<PlanEntry<F>>,
    row_marginal: Array1<F>,
    col_marginal: Array1<F>,
    cost_value: F,
    converged: bool,
}

impl<F: Scalar> CouplingPlan<F> {
    pub(crate) fn from_entries(
        entries: Vec<PlanEntry<F>>,
        row_marginal: Array1<F>,
        col_marginal: Array1<F>,
        cost_value: F,
        converged: bool,
    ) -> Result<Self> {
        let n_rows = row_marginal.len();
        let n_cols = col_marginal.len();
        for e in &entries {
            if (e.row as usize) >= n_rows || (e.col as usize) >= n_cols {
                return Err(Error::DimensionMismatch("plan entry out of bounds".into()));
            }
            if !(e.mass >= F::zero()) || !e.mass.is_finite() {
                return Err(Error::NonFinite(format!("plan mass {}", e.mass)));
            }
        }
        Ok(Self { n_rows, n_cols, entries, row_marginal, col_marginal, cost_value, converged })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn entries(&self) -> &[PlanEntry<F>] {
        &self.entries
    }

    /// Transport cost ⟨cost, plan⟩ reported by the solver.
    pub fn cost_value(&self) -> F {
        self.cost_value
    }

    /// False when an iterative solver hit its iteration cap before meeting
    /// the marginal tolerance. Exact plans always report true.
    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn row_marginal(&self) -> &Array1<F> {
        &self.row_marginal
    }

    pub fn col_marginal(&self) -> &Array1<F> {
        &self.col_marginal
    }

    pub fn row_sums(&self) -> Array1<F> {
        let mut sums = Array1::zeros(self.n_rows);
        for e in &self.entries {
            sums[e.row as usize] += e.mass;
        }
        sums
    }

    pub fn col_sums(&self) -> Array1<F> {
        let mut sums = Array1::zeros(self.n_cols);
        for e in &self.entries {
            sums[e.col as usize] += e.mass;
        }
        sums
    }

    /// Largest absolute marginal violation.
    pub fn marginal_violation(&self) -> F {
        let mut worst = F::zero();
        for (s, m) in self.row_sums().iter().zip(self.row_marginal.iter()) {
            worst = worst.max((*s - *m).abs());
        }
        for (s, m) in self.col_sums().iter().zip(self.col_marginal.iter()) {
            worst = worst.max((*s - *m).abs());
        }
        worst
    }

    /// Check the marginal invariants at the given tolerance.
    pub fn validate(&self, tol: F) -> Result<()> {
        let v = self.marginal_violation();
        if v > tol {
            return Err(Error::Numeric(format!(
                "plan marginal violation {v} exceeds tolerance {tol}"
            )));
        }
        Ok(())
    }

    pub fn to_dense(&self) -> Array2<F> {
        let mut dense = Array2::zeros((self.n_rows, self.n_cols));
        for e in &self.entries {
            dense[[e.row as usize, e.col as usize]] += e.mass;
        }
        dense
    }

    /// Draw `k` (src, tgt) index pairs i.i.d. from the categorical
    /// distribution given by the plan masses.
    pub fn sample_pairs<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<Vec<(usize, usize)>> {
        if k == 0 {
            return Ok(Vec::new());
        }
        let total = kahan_sum(self.entries.iter().map(|e| e.mass));
        if !(total > F::zero()) {
            return Err(Error::Numeric("cannot sample pairs from an all-zero plan".into()));
        }
        let mut cdf = Vec::with_capacity(self.entries.len());
        let mut acc = F::zero();
        for e in &self.entries {
            acc += e.mass;
            cdf.push(acc);
        }
        let top = *cdf.last().expect("nonempty entries");
        let mut pairs = Vec::with_capacity(k);
        for _ in 0..k {
            let r = rng.random_range(F::zero()..top);
            let idx = cdf.partition_point(|&c| c <= r).min(self.entries.len() - 1);
            let e = &self.entries[idx];
            pairs.push((e.row as usize, e.col as usize));
        }
        Ok(pairs)
    }

    /// CSV export with one `i,j,mass` line per entry.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "i,j,mass")?;
        for e in &self.entries {
            writeln!(w, "{},{},{}", e.row, e.col, e.mass.to_f64_lossy())?;
        }
        Ok(())
    }

    /// Dense JSON export: row-major nested arrays plus the marginals.
    pub fn to_dense_json(&self) -> serde_json::Value {
        let dense = self.to_dense();
        let rows: Vec<Vec<f64>> = dense
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|x| x.to_f64_lossy()).collect())
            .collect();
        serde_json::json!({
            "matrix": rows,
            "row_marginal": self.row_marginal.iter().map(|x| x.to_f64_lossy()).collect::<Vec<_>>(),
            "col_marginal": self.col_marginal.iter().map(|x| x.to_f64_lossy()).collect::<Vec<_>>(),
            "cost_value": self.cost_value.to_f64_lossy(),
            "converged": self.converged,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag_plan() -> CouplingPlan<f64> {
        CouplingPlan::from_entries(
            vec![
                PlanEntry { row: 0, col: 0, mass: 0.5 },
                PlanEntry { row: 1, col: 1, mass: 0.5 },
            ],
            array![0.5, 0.5],
            array![0.5, 0.5],
            0.0,
            true,
        )
        .unwrap()
    }

    #[test]
    fn identity_plan_samples_diagonal() {
        let plan = diag_plan();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (i, j) in plan.sample_pairs(200, &mut rng).unwrap() {
            assert_eq!(i, j);
        }
    }

    #[test]
    fn point_mass_plan_samples_single_pair() {
        let plan = CouplingPlan::from_entries(
            vec![PlanEntry { row: 0, col: 1, mass: 1.0 }],
            array![1.0],
            array![0.0, 1.0],
            0.0,
            true,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for pair in plan.sample_pairs(50, &mut rng).unwrap() {
            assert_eq!(pair, (0, 1));
        }
    }

    #[test]
    fn zero_plan_sampling_errors() {
        let plan = CouplingPlan::from_entries(
            vec![PlanEntry { row: 0, col: 0, mass: 0.0 }],
            array![0.0],
            array![0.0],
            0.0,
            true,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(plan.sample_pairs(1, &mut rng).is_err());
    }

    #[test]
    fn pair_frequencies_match_masses() {
        // 2x2 plan with unequal masses; 1e5 draws; 3-sigma multinomial bound.
        let plan = CouplingPlan::from_entries(
            vec![
                PlanEntry { row: 0, col: 0, mass: 0.1 },
                PlanEntry { row: 0, col: 1, mass: 0.2 },
                PlanEntry { row: 1, col: 0, mass: 0.3 },
                PlanEntry { row: 1, col: 1, mass: 0.4 },
            ],
            array![0.3, 0.7],
            array![0.4, 0.6],
            0.0,
            true,
        )
        .unwrap();
        let n = 100_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pairs = plan.sample_pairs(n, &mut rng).unwrap();
        let mut counts = [[0usize; 2]; 2];
        for (i, j) in pairs {
            counts[i][j] += 1;
        }
        for e in plan.entries() {
            let p = e.mass;
            let freq = counts[e.row as usize][e.col as usize] as f64 / n as f64;
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            assert!(
                (freq - p).abs() <= 3.0 * sigma,
                "freq {freq} vs mass {p} (3σ = {})",
                3.0 * sigma
            );
        }
    }

    #[test]
    fn validate_flags_broken_marginals() {
        let plan = CouplingPlan::from_entries(
            vec![PlanEntry { row: 0, col: 0, mass: 0.9 }],
            array![1.0],
            array![1.0],
            0.0,
            true,
        )
        .unwrap();
        assert!(plan.validate(1e-8).is_err());
        assert!(plan.validate(0.2).is_ok());
    }

    #[test]
    fn csv_and_dense_json_round_out() {
        let plan = diag_plan();
        let mut buf = Vec::new();
        plan.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("i,j,mass\n"));
        assert_eq!(text.lines().count(), 3);
        let json = plan.to_dense_json();
        assert_eq!(json["matrix"][0][0], 0.5);
        assert_eq!(json["matrix"][0][1], 0.0);
    }
}
