//! Benchmark data generation: 2D synthetic joints, the product source
//! measure, and the Lotka-Volterra simulator stack.

mod lotka_volterra;
mod synthetic2d;

pub use lotka_volterra::{
    lv_dataset, lv_observe, lv_prior_sample, lv_simulate, LvParams, LvTrajectory,
    LV_DEFAULT_STEP, LV_NOISE_VAR, LV_OBS_DIM, LV_OBS_SPACING, LV_OBS_TIMES, LV_P0,
    LV_PARAM_DIM, LV_PRIOR_MEAN, LV_PRIOR_VAR, LV_T_END,
};
pub use synthetic2d::{sample_2d, Synthetic2D, Synthetic2DSpec};

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::measure::DiscreteMeasure;
use crate::scalar::Scalar;

/// Build the independent-product source for a target: y values resampled
/// from the target's Y-marginal, u coordinates i.i.d. standard normal.
pub fn build_source<F: Scalar>(
    target: &DiscreteMeasure<F>,
    n: usize,
    seed: u64,
) -> Result<DiscreteMeasure<F>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d_y = target.d_y();
    let d_u = target.d_u();
    let mut pts = Array2::zeros((n, d_y + d_u));
    let idx = target.sample_indices(n, &mut rng);
    for (row, &i) in idx.iter().enumerate() {
        let y = target.y(i);
        for k in 0..d_y {
            pts[[row, k]] = y[k];
        }
        for k in 0..d_u {
            pts[[row, d_y + k]] = F::standard_normal(&mut rng);
        }
    }
    DiscreteMeasure::uniform(pts, d_y, d_u)
}

/// Convenience used by tests and the CLI: a fresh y-pool of `pool_n` target
/// draws for the source side, per the benchmark protocol of keeping only
/// the Y coordinates of an extra target sample.
pub fn fresh_y_pool<F: Scalar>(spec: &Synthetic2DSpec, pool_n: usize) -> Result<Array2<F>> {
    let fresh = sample_2d::<F>(&Synthetic2DSpec {
        name: spec.name,
        n: pool_n,
        seed: spec.seed ^ 0x9e37_79b9_7f4a_7c15,
    })?;
    Ok(fresh.y_block().to_owned())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two-sample Kolmogorov-Smirnov statistic on 1D samples.
    fn ks_statistic(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let (n, m) = (a.len(), b.len());
        let mut i = 0;
        let mut j = 0;
        let mut d: f64 = 0.0;
        while i < n && j < m {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
        }
        d
    }

    #[test]
    fn source_y_marginal_matches_target() {
        let spec = Synthetic2DSpec { name: Synthetic2D::Moons, n: 5000, seed: 1 };
        let target: DiscreteMeasure<f64> = sample_2d(&spec).unwrap();
        let source = build_source(&target, 5000, 2).unwrap();
        let ys_t: Vec<f64> = target.y_block().column(0).to_vec();
        let ys_s: Vec<f64> = source.y_block().column(0).to_vec();
        let d = ks_statistic(ys_t, ys_s);
        // two-sample KS threshold at alpha = 1e-3
        let c = (-(0.0005f64).ln() / 2.0).sqrt();
        let thresh = c * ((5000.0f64 + 5000.0) / (5000.0 * 5000.0)).sqrt();
        assert!(d <= thresh, "KS statistic {d} above threshold {thresh}");
    }

    #[test]
    fn source_u_is_standard_normal() {
        let spec = Synthetic2DSpec { name: Synthetic2D::Circles, n: 5000, seed: 3 };
        let target: DiscreteMeasure<f64> = sample_2d(&spec).unwrap();
        let source = build_source(&target, 5000, 4).unwrap();
        let us: Vec<f64> = source.u_block().column(0).to_vec();
        let n = us.len() as f64;
        let mean: f64 = us.iter().sum::<f64>() / n;
        let var: f64 = us.iter().map(|u| (u - mean) * (u - mean)).sum::<f64>() / n;
        assert!(mean.abs() <= 3.0 / n.sqrt(), "mean {mean}");
        assert!((0.9..=1.1).contains(&var), "variance {var}");
    }

    #[test]
    fn source_is_deterministic() {
        let spec = Synthetic2DSpec { name: Synthetic2D::Swissroll, n: 200, seed: 5 };
        let target: DiscreteMeasure<f64> = sample_2d(&spec).unwrap();
        let a = build_source(&target, 100, 6).unwrap();
        let b = build_source(&target, 100, 6).unwrap();
        assert_eq!(a.points(), b.points());
    }
}
