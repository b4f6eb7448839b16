//! Per-coordinate affine standardization fitted on the training set and
//! inverted at sampling time.

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Standardizer<F> {
    pub mean: Vec<F>,
    pub scale: Vec<F>,
}

impl<F: Scalar> Standardizer<F> {
    pub fn identity(dim: usize) -> Self {
        Self { mean: vec![F::zero(); dim], scale: vec![F::one(); dim] }
    }

    /// Fit mean and standard deviation per coordinate; near-constant
    /// coordinates get a floored scale instead of dividing by zero.
    pub fn fit(points: &ArrayView2<'_, F>) -> Result<Self> {
        let n = points.nrows();
        if n == 0 {
            return Err(Error::InvalidConfig("cannot fit a standardizer on no data".into()));
        }
        let inv_n = F::one() / F::cast_usize(n);
        let dim = points.ncols();
        let mut mean = vec![F::zero(); dim];
        let mut scale = vec![F::zero(); dim];
        for k in 0..dim {
            let m: F = points.column(k).iter().copied().sum::<F>() * inv_n;
            mean[k] = m;
            let var: F = points
                .column(k)
                .iter()
                .map(|&x| {
                    let d = x - m;
                    d * d
                })
                .sum::<F>()
                * inv_n;
            scale[k] = var.sqrt().max(F::cast(1e-8));
        }
        Ok(Self { mean, scale })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, points: &ArrayView2<'_, F>) -> Array2<F> {
        let mut out = points.to_owned();
        for mut row in out.rows_mut() {
            for (k, x) in row.iter_mut().enumerate() {
                *x = (*x - self.mean[k]) / self.scale[k];
            }
        }
        out
    }

    pub fn inverse(&self, points: &ArrayView2<'_, F>) -> Array2<F> {
        let mut out = points.to_owned();
        for mut row in out.rows_mut() {
            for (k, x) in row.iter_mut().enumerate() {
                *x = *x * self.scale[k] + self.mean[k];
            }
        }
        out
    }

    /// Scales of the trailing `d_u` coordinates; velocities learned in
    /// standardized space are multiplied by these to act on raw coordinates.
    pub fn u_scales(&self, d_y: usize) -> Array1<F> {
        Array1::from_iter(self.scale[d_y..].iter().copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn round_trips() {
        let pts = array![[1.0f64, 10.0], [3.0, 30.0], [5.0, 20.0]];
        let s = Standardizer::fit(&pts.view()).unwrap();
        let z = s.transform(&pts.view());
        let back = s.inverse(&z.view());
        for (a, b) in pts.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        let mean0: f64 = z.column(0).sum() / 3.0;
        assert!(mean0.abs() < 1e-12);
    }

    #[test]
    fn constant_coordinate_keeps_finite_scale() {
        let pts = array![[2.0f64, 1.0], [2.0, -1.0]];
        let s = Standardizer::fit(&pts.view()).unwrap();
        assert!(s.scale[0] >= 1e-8);
        let z = s.transform(&pts.view());
        assert!(z.iter().all(|x| x.is_finite()));
    }
}
