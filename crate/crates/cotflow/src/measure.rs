//! Weighted point clouds on a product space Y × U.
//!
//! A [`DiscreteMeasure`] is the empirical object everything else consumes:
//! each point is a vector in R^{d_y + d_u} laid out as the observation block
//! `y` followed by the unknown block `u`, with a probability weight per point.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::{kahan_sum, Scalar};

#[derive(Debug, Clone)]
pub struct DiscreteMeasure<F> {
    points: Array2<F>,
    weights: Array1<F>,
    d_y: usize,
    d_u: usize,
}

impl<F: Scalar> DiscreteMeasure<F> {
    /// Build a measure from points (one row per atom, `d_y + d_u` columns)
    /// and nonnegative weights summing to one.
    pub fn new(points: Array2<F>, weights: Array1<F>, d_y: usize, d_u: usize) -> Result<Self> {
        if d_y == 0 || d_u == 0 {
            return Err(Error::InvalidMeasure(format!(
                "both coordinate blocks must be nonempty, got d_y={d_y}, d_u={d_u}"
            )));
        }
        if points.ncols() != d_y + d_u {
            return Err(Error::DimensionMismatch(format!(
                "points have {} columns, expected d_y + d_u = {}",
                points.ncols(),
                d_y + d_u
            )));
        }
        if points.nrows() != weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} points but {} weights",
                points.nrows(),
                weights.len()
            )));
        }
        if points.nrows() == 0 {
            return Err(Error::InvalidMeasure("measure needs at least one atom".into()));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("measure points".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < F::zero()) {
            return Err(Error::InvalidMeasure("weights must be finite and nonnegative".into()));
        }
        let total = kahan_sum(weights.iter().copied());
        if (total - F::one()).abs() > F::weight_sum_tol() {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {total}, expected 1 within {}",
                F::weight_sum_tol()
            )));
        }
        Ok(Self { points, weights, d_y, d_u })
    }

    /// Uniform weights over the given points.
    pub fn uniform(points: Array2<F>, d_y: usize, d_u: usize) -> Result<Self> {
        let n = points.nrows();
        if n == 0 {
            return Err(Error::InvalidMeasure("measure needs at least one atom".into()));
        }
        let w = F::one() / F::cast_usize(n);
        let mut weights = Array1::from_elem(n, w);
        // Fix the (at most one-ulp) rounding residue so the sum is exact.
        let residue = F::one() - kahan_sum(weights.iter().copied());
        weights[0] += residue;
        Self::new(points, weights, d_y, d_u)
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn d_y(&self) -> usize {
        self.d_y
    }

    pub fn d_u(&self) -> usize {
        self.d_u
    }

    pub fn dim(&self) -> usize {
        self.d_y + self.d_u
    }

    pub fn points(&self) -> ArrayView2<'_, F> {
        self.points.view()
    }

    pub fn weights(&self) -> ArrayView1<'_, F> {
        self.weights.view()
    }

    pub fn point(&self, i: usize) -> ArrayView1<'_, F> {
        self.points.row(i)
    }

    /// The `y` block of atom `i`.
    pub fn y(&self, i: usize) -> ArrayView1<'_, F> {
        self.points.row(i).split_at(Axis(0), self.d_y).0
    }

    /// The `u` block of atom `i`.
    pub fn u(&self, i: usize) -> ArrayView1<'_, F> {
        self.points.row(i).split_at(Axis(0), self.d_y).1
    }

    /// All `y` columns as a view.
    pub fn y_block(&self) -> ArrayView2<'_, F> {
        self.points.slice(ndarray::s![.., ..self.d_y])
    }

    /// All `u` columns as a view.
    pub fn u_block(&self) -> ArrayView2<'_, F> {
        self.points.slice(ndarray::s![.., self.d_y..])
    }

    /// True when both inputs share the (d_y, d_u) split.
    pub fn same_split(&self, other: &Self) -> bool {
        self.d_y == other.d_y && self.d_u == other.d_u
    }

    /// Draw `n` atom indices according to the weights.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        let mut cdf = Vec::with_capacity(self.len());
        let mut acc = F::zero();
        for &w in self.weights.iter() {
            acc += w;
            cdf.push(acc);
        }
        let total = *cdf.last().expect("nonempty measure");
        (0..n)
            .map(|_| {
                let r = rng.random_range(F::zero()..total);
                cdf.partition_point(|&c| c <= r).min(self.len() - 1)
            })
            .collect()
    }

    /// Equality as weighted point sets: atoms at the same location (within
    /// `tol` per coordinate) are merged before comparing masses.
    pub fn approx_same_measure(&self, other: &Self, tol: F) -> bool {
        if !self.same_split(other) {
            return false;
        }
        let a = aggregate(self, tol);
        let b = aggregate(other, tol);
        if a.len() != b.len() {
            return false;
        }
        a.iter().zip(b.iter()).all(|((pa, wa), (pb, wb))| {
            (*wa - *wb).abs() <= tol && pa.iter().zip(pb.iter()).all(|(x, y)| (*x - *y).abs() <= tol)
        })
    }
}

fn aggregate<F: Scalar>(m: &DiscreteMeasure<F>, tol: F) -> Vec<(Vec<F>, F)> {
    let mut atoms: Vec<(Vec<F>, F)> = (0..m.len())
        .map(|i| (m.point(i).to_vec(), m.weights()[i]))
        .collect();
    atoms.sort_by(|a, b| {
        a.0.iter()
            .zip(b.0.iter())
            .map(|(x, y)| x.partial_cmp(y).expect("finite coordinates"))
            .find(|o| *o != std::cmp::Ordering::Equal)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut merged: Vec<(Vec<F>, F)> = Vec::new();
    for (p, w) in atoms {
        match merged.last_mut() {
            Some((q, wq)) if q.iter().zip(p.iter()).all(|(x, y)| (*x - *y).abs() <= tol) => {
                *wq += w;
            }
            _ => merged.push((p, w)),
        }
    }
    merged.retain(|(_, w)| *w > tol);
    merged
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_bad_weights() {
        let pts = array![[0.0, 0.0], [1.0, 1.0]];
        assert!(DiscreteMeasure::new(pts.clone(), array![0.5, 0.6], 1, 1).is_err());
        assert!(DiscreteMeasure::new(pts.clone(), array![-0.5, 1.5], 1, 1).is_err());
        assert!(DiscreteMeasure::new(pts, array![0.5, 0.5], 1, 1).is_ok());
    }

    #[test]
    fn rejects_empty_blocks() {
        let pts = array![[0.0, 0.0]];
        assert!(DiscreteMeasure::new(pts.clone(), array![1.0], 0, 2).is_err());
        assert!(DiscreteMeasure::new(pts, array![1.0], 2, 0).is_err());
    }

    #[test]
    fn uniform_weights_sum_exactly_to_one() {
        // 3 atoms: 1/3 is not representable; the residue fix keeps the sum exact.
        let pts = Array2::<f64>::zeros((3, 2));
        let m = DiscreteMeasure::uniform(pts, 1, 1).unwrap();
        assert_eq!(kahan_sum(m.weights().iter().copied()), 1.0);
    }

    #[test]
    fn block_views_split_y_and_u() {
        let pts = array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
        let m = DiscreteMeasure::uniform(pts, 2, 1).unwrap();
        assert_eq!(m.y(1).to_vec(), vec![4.0, 5.0]);
        assert_eq!(m.u(1).to_vec(), vec![6.0]);
        assert_eq!(m.u_block().column(0).to_vec(), vec![3.0, 6.0]);
    }

    #[test]
    fn measure_equality_ignores_atom_order_and_merges_duplicates() {
        let a = DiscreteMeasure::new(array![[0.0, 1.0], [0.0, 2.0]], array![0.25, 0.75], 1, 1)
            .unwrap();
        let b = DiscreteMeasure::new(
            array![[0.0, 2.0], [0.0, 1.0], [0.0, 2.0]],
            array![0.5, 0.25, 0.25],
            1,
            1,
        )
        .unwrap();
        assert!(a.approx_same_measure(&b, 1e-12));
        let c = DiscreteMeasure::new(array![[0.0, 1.0], [0.0, 2.0]], array![0.5, 0.5], 1, 1)
            .unwrap();
        assert!(!a.approx_same_measure(&c, 1e-12));
    }

    #[test]
    fn sample_indices_deterministic_and_weighted() {
        use rand::SeedableRng;
        let m = DiscreteMeasure::new(array![[0.0, 0.0], [0.0, 1.0]], array![0.0, 1.0], 1, 1)
            .unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let idx = m.sample_indices(100, &mut rng);
        assert!(idx.iter().all(|&i| i == 1));
        let mut rng2 = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        assert_eq!(idx, m.sample_indices(100, &mut rng2));
    }
}
