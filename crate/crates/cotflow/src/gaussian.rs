//! Joint Gaussians on Y × U and the closed-form conditional W₂ distance.
//!
//! For two Gaussians sharing their Y-marginal N(m, Σ), the squared
//! conditional distance is
//!
//! ```text
//! |m_u^η − m_u^ν|² + Tr(Q^η + Q^ν − 2 ((Q^η)^½ Q^ν (Q^η)^½)^½ + R Σ Rᵀ)
//! ```
//!
//! with Q the conditional covariances (Schur complements) and
//! R = (Σ_uy^η − Σ_uy^ν) Σ⁻¹. This is the unconditional Gaussian W₂ formula
//! plus the Tr(RΣRᵀ) correction for the differing cross-covariances, and it
//! serves as the analytic oracle for the empirical estimators.

use ndarray::{concatenate, Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, spd_solve, spd_sqrt, trace};
use crate::measure::DiscreteMeasure;
use crate::scalar::Scalar;

/// Eigenvalue floor applied before matrix square roots; conditional
/// covariances can be nearly singular.
const SQRT_EIGENVALUE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct GaussianJoint<F> {
    m_y: Array1<F>,
    m_u: Array1<F>,
    sigma_yy: Array2<F>,
    sigma_yu: Array2<F>,
    sigma_uu: Array2<F>,
}

impl<F: Scalar> GaussianJoint<F> {
    pub fn new(
        m_y: Array1<F>,
        m_u: Array1<F>,
        sigma_yy: Array2<F>,
        sigma_yu: Array2<F>,
        sigma_uu: Array2<F>,
    ) -> Result<Self> {
        let d_y = m_y.len();
        let d_u = m_u.len();
        if sigma_yy.dim() != (d_y, d_y)
            || sigma_yu.dim() != (d_y, d_u)
            || sigma_uu.dim() != (d_u, d_u)
        {
            return Err(Error::DimensionMismatch(
                "covariance blocks do not match mean dimensions".into(),
            ));
        }
        let g = Self { m_y, m_u, sigma_yy, sigma_yu, sigma_uu };
        let tol = sym_tol::<F>(&g.full_cov());
        for (name, m) in [("sigma_yy", &g.sigma_yy), ("sigma_uu", &g.sigma_uu)] {
            for i in 0..m.nrows() {
                for j in (i + 1)..m.ncols() {
                    if (m[[i, j]] - m[[j, i]]).abs() > tol {
                        return Err(Error::InvalidConfig(format!("{name} is not symmetric")));
                    }
                }
            }
        }
        // Full covariance must be positive definite.
        cholesky(&g.full_cov()).map_err(|_| {
            Error::Numeric("joint covariance is not positive definite".into())
        })?;
        Ok(g)
    }

    pub fn d_y(&self) -> usize {
        self.m_y.len()
    }

    pub fn d_u(&self) -> usize {
        self.m_u.len()
    }

    pub fn m_y(&self) -> &Array1<F> {
        &self.m_y
    }

    pub fn m_u(&self) -> &Array1<F> {
        &self.m_u
    }

    pub fn sigma_yy(&self) -> &Array2<F> {
        &self.sigma_yy
    }

    pub fn sigma_yu(&self) -> &Array2<F> {
        &self.sigma_yu
    }

    /// Σ_uy, stored implicitly as the transpose of Σ_yu.
    pub fn sigma_uy(&self) -> Array2<F> {
        self.sigma_yu.t().to_owned()
    }

    pub fn sigma_uu(&self) -> &Array2<F> {
        &self.sigma_uu
    }

    pub fn full_mean(&self) -> Array1<F> {
        concatenate![Axis(0), self.m_y.view(), self.m_u.view()]
    }

    pub fn full_cov(&self) -> Array2<F> {
        let d_y = self.d_y();
        let d = d_y + self.d_u();
        let mut cov = Array2::zeros((d, d));
        cov.slice_mut(ndarray::s![..d_y, ..d_y]).assign(&self.sigma_yy);
        cov.slice_mut(ndarray::s![..d_y, d_y..]).assign(&self.sigma_yu);
        cov.slice_mut(ndarray::s![d_y.., ..d_y]).assign(&self.sigma_yu.t());
        cov.slice_mut(ndarray::s![d_y.., d_y..]).assign(&self.sigma_uu);
        cov
    }

    /// Conditional covariance Q = Σ_uu − Σ_uy Σ_yy⁻¹ Σ_yu.
    pub fn conditional_cov(&self) -> Result<Array2<F>> {
        let x = spd_solve(&self.sigma_yy, &self.sigma_yu)?;
        Ok(&self.sigma_uu - &self.sigma_yu.t().dot(&x))
    }

    /// Draw `n` joint samples as a uniform discrete measure.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<DiscreteMeasure<F>> {
        let d = self.d_y() + self.d_u();
        let l = cholesky(&self.full_cov())?;
        let mean = self.full_mean();
        let mut pts = Array2::zeros((n, d));
        let mut z = Array1::zeros(d);
        for s in 0..n {
            for zi in z.iter_mut() {
                *zi = F::standard_normal(rng);
            }
            let x = l.dot(&z);
            for k in 0..d {
                pts[[s, k]] = mean[k] + x[k];
            }
        }
        DiscreteMeasure::uniform(pts, self.d_y(), self.d_u())
    }
}

fn sym_tol<F: Scalar>(m: &Array2<F>) -> F {
    let scale = m.iter().fold(F::zero(), |acc, x| acc.max(x.abs())).max(F::one());
    scale * F::cast(1e-10).max(F::epsilon() * F::cast(256.0))
}

/// Squared unconditional W₂ between Gaussians N(ma, a) and N(mb, b):
/// |Δm|² + Tr(a + b − 2 (a^½ b a^½)^½).
pub fn gaussian_w2_squared<F: Scalar>(
    mean_a: &Array1<F>,
    cov_a: &Array2<F>,
    mean_b: &Array1<F>,
    cov_b: &Array2<F>,
) -> Result<F> {
    if mean_a.len() != mean_b.len() {
        return Err(Error::DimensionMismatch("gaussian means differ in length".into()));
    }
    let floor = F::cast(SQRT_EIGENVALUE_FLOOR);
    let ra = spd_sqrt(cov_a, floor)?;
    let inner = ra.dot(cov_b).dot(&ra);
    let cross = spd_sqrt(&inner, floor)?;
    let mut dm2 = F::zero();
    for (x, y) in mean_a.iter().zip(mean_b.iter()) {
        let d = *y - *x;
        dm2 += d * d;
    }
    Ok(dm2 + trace(cov_a) + trace(cov_b) - F::cast(2.0) * trace(&cross))
}

/// Squared conditional W₂ between two joint Gaussians with equal Y-marginals.
pub fn gaussian_cw2_squared<F: Scalar>(
    eta: &GaussianJoint<F>,
    nu: &GaussianJoint<F>,
) -> Result<F> {
    if eta.d_y() != nu.d_y() || eta.d_u() != nu.d_u() {
        return Err(Error::DimensionMismatch("joint Gaussians differ in block sizes".into()));
    }
    let tol = sym_tol::<F>(&eta.sigma_yy);
    let mean_gap = eta
        .m_y
        .iter()
        .zip(nu.m_y.iter())
        .fold(F::zero(), |acc, (a, b)| acc.max((*a - *b).abs()));
    let cov_gap = eta
        .sigma_yy
        .iter()
        .zip(nu.sigma_yy.iter())
        .fold(F::zero(), |acc, (a, b)| acc.max((*a - *b).abs()));
    if mean_gap > tol || cov_gap > tol {
        return Err(Error::InvalidConfig(format!(
            "Y-marginals differ (mean gap {mean_gap}, cov gap {cov_gap}); \
             the conditional distance requires equal Y-marginals"
        )));
    }

    let sigma = &eta.sigma_yy;
    let q_eta = eta.conditional_cov()?;
    let q_nu = nu.conditional_cov()?;

    // R = (Σ_uy^η − Σ_uy^ν) Σ⁻¹, via Rᵀ = Σ⁻¹ (Σ_yu^η − Σ_yu^ν).
    let diff_yu = &eta.sigma_yu - &nu.sigma_yu;
    let rt = spd_solve(sigma, &diff_yu)?;
    let r_sigma_rt = rt.t().dot(sigma).dot(&rt);

    let floor = F::cast(SQRT_EIGENVALUE_FLOOR);
    let q_eta_half = spd_sqrt(&q_eta, floor)?;
    let inner = q_eta_half.dot(&q_nu).dot(&q_eta_half);
    let cross = spd_sqrt(&inner, floor)?;

    let mut dm2 = F::zero();
    for (a, b) in eta.m_u.iter().zip(nu.m_u.iter()) {
        let d = *a - *b;
        dm2 += d * d;
    }
    Ok(dm2 + trace(&q_eta) + trace(&q_nu) - F::cast(2.0) * trace(&cross) + trace(&r_sigma_rt))
}

/// JSON-friendly description of a joint Gaussian (row-major blocks).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianJointSpec<F> {
    pub m_y: Vec<F>,
    pub m_u: Vec<F>,
    pub sigma_yy: Vec<Vec<F>>,
    pub sigma_yu: Vec<Vec<F>>,
    pub sigma_uu: Vec<Vec<F>>,
}

fn rows_to_matrix<F: Scalar>(rows: &[Vec<F>], name: &str) -> Result<Array2<F>> {
    let nrows = rows.len();
    let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidConfig(format!("{name} rows have inconsistent lengths")));
    }
    let flat: Vec<F> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((nrows, ncols), flat)
        .map_err(|e| Error::InvalidConfig(format!("{name}: {e}")))
}

impl<F: Scalar> GaussianJointSpec<F> {
    pub fn build(&self) -> Result<GaussianJoint<F>> {
        GaussianJoint::new(
            Array1::from_vec(self.m_y.clone()),
            Array1::from_vec(self.m_u.clone()),
            rows_to_matrix(&self.sigma_yy, "sigma_yy")?,
            rows_to_matrix(&self.sigma_yu, "sigma_yu")?,
            rows_to_matrix(&self.sigma_uu, "sigma_uu")?,
        )
    }

    pub fn from_json(text: &str) -> Result<GaussianJoint<F>> {
        let spec: Self = serde_json::from_str(text)?;
        spec.build()
    }
}

/// The 2D example pair: η = N(0, I), ν = N(0, [[1, ρ], [ρ, 1]]).
pub fn correlation_pair<F: Scalar>(rho: F) -> Result<(GaussianJoint<F>, GaussianJoint<F>)> {
    let eye = |v: F| -> Result<GaussianJoint<F>> {
        GaussianJoint::new(
            Array1::zeros(1),
            Array1::zeros(1),
            Array2::eye(1),
            Array2::from_elem((1, 1), v),
            Array2::eye(1),
        )
    };
    Ok((eye(F::zero())?, eye(rho)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn correlation_example_matches_closed_form() {
        for &rho in &[0.0f64, 0.3, 0.6, 0.9] {
            let (eta, nu) = correlation_pair(rho).unwrap();
            let got = gaussian_cw2_squared(&eta, &nu).unwrap();
            let expect = 2.0 * (1.0 - (1.0 - rho * rho).sqrt());
            assert_abs_diff_eq!(got, expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn identical_joints_have_zero_distance() {
        let (_, nu) = correlation_pair(0.7).unwrap();
        let got = gaussian_cw2_squared(&nu, &nu).unwrap();
        assert_abs_diff_eq!(got, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn uncorrelated_blocks_reduce_to_u_marginal_w2() {
        // Σ_yu = 0 on both sides: the conditional distance must equal the
        // unconditional W₂² of the U-marginals, which is available by hand
        // for diagonal covariances.
        let eta = GaussianJoint::new(
            array![0.0],
            array![1.0, -1.0],
            array![[2.0]],
            Array2::zeros((1, 2)),
            Array2::from_diag(&array![4.0, 9.0]),
        )
        .unwrap();
        let nu = GaussianJoint::new(
            array![0.0],
            array![0.0, 0.5],
            array![[2.0]],
            Array2::zeros((1, 2)),
            Array2::from_diag(&array![1.0, 16.0]),
        )
        .unwrap();
        let got = gaussian_cw2_squared(&eta, &nu).unwrap();
        // |Δm|² + Σ (√a − √b)² = (1 + 2.25) + (2−1)² + (3−4)²
        let hand = 3.25 + 1.0 + 1.0;
        assert_abs_diff_eq!(got, hand, epsilon = 1e-12);
        let marg = gaussian_w2_squared(
            &array![1.0, -1.0],
            &Array2::from_diag(&array![4.0, 9.0]),
            &array![0.0, 0.5],
            &Array2::from_diag(&array![1.0, 16.0]),
        )
        .unwrap();
        assert_abs_diff_eq!(got, marg, epsilon = 1e-12);
    }

    #[test]
    fn mismatched_y_marginals_rejected() {
        let (eta, _) = correlation_pair(0.5).unwrap();
        let other = GaussianJoint::new(
            array![1.0],
            array![0.0],
            array![[1.0]],
            array![[0.0]],
            array![[1.0]],
        )
        .unwrap();
        assert!(gaussian_cw2_squared(&eta, &other).is_err());
    }

    #[test]
    fn non_spd_covariance_rejected() {
        let bad = GaussianJoint::new(
            array![0.0],
            array![0.0],
            array![[1.0]],
            array![[1.1]],
            array![[1.0]],
        );
        assert!(bad.is_err());
    }

    #[test]
    fn sample_moments_follow_the_joint() {
        let (_, nu) = correlation_pair(0.8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 40_000;
        let m = nu.sample(n, &mut rng).unwrap();
        let pts = m.points();
        let mean_y: f64 = pts.column(0).sum() / n as f64;
        let mean_u: f64 = pts.column(1).sum() / n as f64;
        let cov_yu: f64 =
            pts.rows().into_iter().map(|r| r[0] * r[1]).sum::<f64>() / n as f64;
        assert!(mean_y.abs() < 0.02);
        assert!(mean_u.abs() < 0.02);
        assert!((cov_yu - 0.8).abs() < 0.03);
    }

    #[test]
    fn json_spec_round_trip() {
        let text = r#"{
            "m_y": [0.0],
            "m_u": [0.0],
            "sigma_yy": [[1.0]],
            "sigma_yu": [[0.5]],
            "sigma_uu": [[1.0]]
        }"#;
        let g: GaussianJoint<f64> = GaussianJointSpec::from_json(text).unwrap();
        assert_eq!(g.sigma_yu()[[0, 0]], 0.5);
        assert!(GaussianJointSpec::<f64>::from_json("{\"m_y\": [0.0]}").is_err());
    }
}
