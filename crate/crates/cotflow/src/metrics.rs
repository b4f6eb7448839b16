//! Evaluation metrics: empirical W₂ between sample sets via exact
//! assignment, and MMD with a Gaussian kernel.

use ndarray::{Array1, Array2, ArrayView2};
use rand::{seq::SliceRandom, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ot::{solve_assignment, solve_exact};
use crate::scalar::{kahan_sum, Scalar};

/// Cap on the per-set size used by [`w2_empirical`]; larger sets are
/// subsampled deterministically.
pub const W2_SUBSAMPLE_CAP: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MmdEstimator {
    Biased,
    Unbiased,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "bandwidth")]
pub enum MmdBandwidth<F> {
    /// Median pairwise distance of the pooled sample (deterministically
    /// subsampled when large).
    MedianHeuristic,
    Explicit { value: F },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmdConfig<F> {
    pub bandwidth: MmdBandwidth<F>,
    pub estimator: MmdEstimator,
}

impl<F: Scalar> Default for MmdConfig<F> {
    fn default() -> Self {
        Self { bandwidth: MmdBandwidth::MedianHeuristic, estimator: MmdEstimator::Biased }
    }
}

impl<F: Scalar> MmdConfig<F> {
    pub fn validate(&self) -> Result<()> {
        if let MmdBandwidth::Explicit { value } = self.bandwidth {
            if !(value > F::zero()) || !value.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "MMD bandwidth must be positive, got {value}"
                )));
            }
        }
        Ok(())
    }
}

fn squared_distance<F: Scalar>(a: &ArrayView2<'_, F>, i: usize, b: &ArrayView2<'_, F>, j: usize) -> F {
    let mut d2 = F::zero();
    for k in 0..a.ncols() {
        let d = b[[j, k]] - a[[i, k]];
        d2 += d * d;
    }
    d2
}

fn subsample<F: Scalar>(x: &ArrayView2<'_, F>, n: usize, rng: &mut ChaCha8Rng) -> Array2<F> {
    let mut idx: Vec<usize> = (0..x.nrows()).collect();
    idx.shuffle(rng);
    idx.truncate(n);
    idx.sort_unstable();
    let mut out = Array2::zeros((n, x.ncols()));
    for (row, &i) in idx.iter().enumerate() {
        out.row_mut(row).assign(&x.row(i));
    }
    out
}

/// Empirical W₂ between two point sets: the square root of the optimal
/// average squared-distance assignment cost. Sets are truncated to equal
/// size (and to [`W2_SUBSAMPLE_CAP`]) by seeded subsampling.
pub fn w2_empirical<F: Scalar>(
    x: &ArrayView2<'_, F>,
    z: &ArrayView2<'_, F>,
    seed: u64,
) -> Result<F> {
    if x.ncols() != z.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "point sets have {} and {} coordinates",
            x.ncols(),
            z.ncols()
        )));
    }
    if x.nrows() == 0 || z.nrows() == 0 {
        return Err(Error::InvalidConfig("empty point set".into()));
    }
    let n = x.nrows().min(z.nrows()).min(W2_SUBSAMPLE_CAP);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs = if x.nrows() > n { subsample(x, n, &mut rng) } else { x.to_owned() };
    let zs = if z.nrows() > n { subsample(z, n, &mut rng) } else { z.to_owned() };

    let mut cost = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            cost[[i, j]] = squared_distance(&xs.view(), i, &zs.view(), j);
        }
    }
    let assignment = solve_assignment(&cost)?;
    let total = kahan_sum(assignment.iter().enumerate().map(|(i, &j)| cost[[i, j]]));
    Ok((total / F::cast_usize(n)).sqrt())
}

/// Empirical W_p between weighted point sets via the exact general solver.
/// Returns W_p itself (the p-th root of the optimal cost).
pub fn wasserstein_weighted<F: Scalar>(
    x: &ArrayView2<'_, F>,
    wx: &Array1<F>,
    z: &ArrayView2<'_, F>,
    wz: &Array1<F>,
    p: u32,
) -> Result<F> {
    if x.ncols() != z.ncols() {
        return Err(Error::DimensionMismatch("point sets differ in dimension".into()));
    }
    if p != 1 && p != 2 {
        return Err(Error::InvalidConfig("power must be 1 or 2".into()));
    }
    let mut cost = Array2::zeros((x.nrows(), z.nrows()));
    for i in 0..x.nrows() {
        for j in 0..z.nrows() {
            let d2 = squared_distance(x, i, z, j);
            cost[[i, j]] = if p == 2 { d2 } else { d2.sqrt() };
        }
    }
    let plan = solve_exact(&cost, wx, wz)?;
    let c = plan.cost_value().max(F::zero());
    Ok(if p == 2 { c.sqrt() } else { c })
}

/// Median pairwise Euclidean distance of the pooled rows; the pool is
/// subsampled to at most 1024 rows (seeded) before the quadratic scan.
pub fn median_heuristic_bandwidth<F: Scalar>(
    x: &ArrayView2<'_, F>,
    z: &ArrayView2<'_, F>,
    seed: u64,
) -> Result<F> {
    let cap = 1024usize;
    let total = x.nrows() + z.nrows();
    if total < 2 {
        return Err(Error::InvalidConfig("need at least two points for the median heuristic".into()));
    }
    let mut pooled = Array2::zeros((total, x.ncols()));
    for (i, row) in x.rows().into_iter().enumerate() {
        pooled.row_mut(i).assign(&row);
    }
    for (i, row) in z.rows().into_iter().enumerate() {
        pooled.row_mut(x.nrows() + i).assign(&row);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool =
        if total > cap { subsample(&pooled.view(), cap, &mut rng) } else { pooled };
    let n = pool.nrows();
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            dists.push(squared_distance(&pool.view(), i, &pool.view(), j).sqrt());
        }
    }
    dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let median = dists[dists.len() / 2];
    if !(median > F::zero()) {
        return Err(Error::Numeric("median pairwise distance is zero".into()));
    }
    Ok(median)
}

/// Squared MMD with the Gaussian kernel k(x, z) = exp(−|x−z|²/(2h²)).
pub fn mmd_squared<F: Scalar>(
    x: &ArrayView2<'_, F>,
    z: &ArrayView2<'_, F>,
    cfg: &MmdConfig<F>,
    seed: u64,
) -> Result<F> {
    cfg.validate()?;
    if x.ncols() != z.ncols() {
        return Err(Error::DimensionMismatch("point sets differ in dimension".into()));
    }
    let n = x.nrows();
    let m = z.nrows();
    if n == 0 || m == 0 {
        return Err(Error::InvalidConfig("empty point set".into()));
    }
    let h = match cfg.bandwidth {
        MmdBandwidth::Explicit { value } => value,
        MmdBandwidth::MedianHeuristic => median_heuristic_bandwidth(x, z, seed)?,
    };
    let gamma = F::one() / (F::cast(2.0) * h * h);
    let kern = |d2: F| (-gamma * d2).exp();

    let mut sum_xx = F::zero();
    let mut sum_zz = F::zero();
    let mut sum_xz = F::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum_xx += kern(squared_distance(x, i, x, j));
            }
        }
    }
    for i in 0..m {
        for j in 0..m {
            if i != j {
                sum_zz += kern(squared_distance(z, i, z, j));
            }
        }
    }
    for i in 0..n {
        for j in 0..m {
            sum_xz += kern(squared_distance(x, i, z, j));
        }
    }
    let nf = F::cast_usize(n);
    let mf = F::cast_usize(m);
    let cross = F::cast(2.0) * sum_xz / (nf * mf);
    match cfg.estimator {
        MmdEstimator::Biased => {
            // diagonals contribute k(x,x) = 1
            let xx = (sum_xx + nf) / (nf * nf);
            let zz = (sum_zz + mf) / (mf * mf);
            Ok(xx + zz - cross)
        }
        MmdEstimator::Unbiased => {
            if n < 2 || m < 2 {
                return Err(Error::InvalidConfig(
                    "unbiased MMD needs at least two points per set".into(),
                ));
            }
            let xx = sum_xx / (nf * (nf - F::one()));
            let zz = sum_zz / (mf * (mf - F::one()));
            Ok(xx + zz - cross)
        }
    }
}

/// Serializable record of one metric evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    pub value: f64,
    pub n: usize,
    pub seed: u64,
    pub config: serde_json::Value,
}
