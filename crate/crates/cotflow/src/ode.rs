//! Deterministic integration of the learned flow from t = 0 to 1.
//!
//! Only the u block of the state evolves; y never changes, which is the
//! structural counterpart of the triangular field. Fixed-step Euler and RK4
//! integrate whole batches at once (one network evaluation per stage);
//! adaptive Dormand-Prince is available for diagnostics.

use ndarray::{Array1, Array2, ArrayView2};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{TrainedModel, VectorFieldParams};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "method")]
pub enum IntegratorMethod<F> {
    Euler,
    Rk4,
    DopriAdaptive { rtol: F, atol: F },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig<F> {
    pub method: IntegratorMethod<F>,
    /// Step count for the fixed-step methods.
    pub steps: usize,
}

impl<F: Scalar> Default for IntegratorConfig<F> {
    fn default() -> Self {
        Self { method: IntegratorMethod::Rk4, steps: 100 }
    }
}

impl<F: Scalar> IntegratorConfig<F> {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidConfig("integrator needs steps >= 1".into()));
        }
        if let IntegratorMethod::DopriAdaptive { rtol, atol } = self.method {
            if !(rtol > F::zero()) || !(atol > F::zero()) {
                return Err(Error::InvalidConfig(
                    "adaptive integrator needs positive tolerances".into(),
                ));
            }
        }
        Ok(())
    }
}

/// A time-dependent velocity on the u block of raw (y…, u…) states.
pub trait UVelocityField<F> {
    fn d_y(&self) -> usize;
    fn d_u(&self) -> usize;
    fn u_velocity(&self, t: F, states: &ArrayView2<'_, F>) -> Result<Array2<F>>;
}

impl<F: Scalar> UVelocityField<F> for TrainedModel<F> {
    fn d_y(&self) -> usize {
        self.params.d_y()
    }

    fn d_u(&self) -> usize {
        self.params.d_u()
    }

    fn u_velocity(&self, t: F, states: &ArrayView2<'_, F>) -> Result<Array2<F>> {
        self.velocity_batch(t, states)
    }
}

/// The bare network acts on already-standardized coordinates.
impl<F: Scalar> UVelocityField<F> for VectorFieldParams<F> {
    fn d_y(&self) -> usize {
        VectorFieldParams::d_y(self)
    }

    fn d_u(&self) -> usize {
        VectorFieldParams::d_u(self)
    }

    fn u_velocity(&self, t: F, states: &ArrayView2<'_, F>) -> Result<Array2<F>> {
        let (n, dim) = states.dim();
        let mut x = Array2::zeros((n, 1 + dim));
        for i in 0..n {
            x[[i, 0]] = t;
            for k in 0..dim {
                x[[i, 1 + k]] = states[[i, k]];
            }
        }
        self.forward_batch(&x.view())
    }
}

fn check_finite<F: Scalar>(u: &Array2<F>, t: F) -> Result<()> {
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("integration state at t = {t}")));
    }
    Ok(())
}

/// Integrate a batch of states from t = 0 to 1, evolving only the u block.
/// The y columns of the result are bit-identical to the input.
pub fn integrate_batch<F: Scalar>(
    field: &dyn UVelocityField<F>,
    states: &ArrayView2<'_, F>,
    cfg: &IntegratorConfig<F>,
) -> Result<Array2<F>> {
    cfg.validate()?;
    let d_y = field.d_y();
    let d_u = field.d_u();
    if states.ncols() != d_y + d_u {
        return Err(Error::DimensionMismatch(format!(
            "states have {} coords, field expects {}",
            states.ncols(),
            d_y + d_u
        )));
    }
    let mut cur = states.to_owned();
    match cfg.method {
        IntegratorMethod::Euler => {
            let h = F::one() / F::cast_usize(cfg.steps);
            for s in 0..cfg.steps {
                let t = F::cast_usize(s) * h;
                let v = field.u_velocity(t, &cur.view())?;
                add_scaled_u(&mut cur, &v, h, d_y);
                check_finite(&cur.slice(ndarray::s![.., d_y..]).to_owned(), t)?;
            }
        }
        IntegratorMethod::Rk4 => {
            let h = F::one() / F::cast_usize(cfg.steps);
            let half = h / F::cast(2.0);
            for s in 0..cfg.steps {
                let t = F::cast_usize(s) * h;
                let k1 = field.u_velocity(t, &cur.view())?;
                let mut s2 = cur.clone();
                add_scaled_u(&mut s2, &k1, half, d_y);
                let k2 = field.u_velocity(t + half, &s2.view())?;
                let mut s3 = cur.clone();
                add_scaled_u(&mut s3, &k2, half, d_y);
                let k3 = field.u_velocity(t + half, &s3.view())?;
                let mut s4 = cur.clone();
                add_scaled_u(&mut s4, &k3, h, d_y);
                let k4 = field.u_velocity(t + h, &s4.view())?;
                let sixth = h / F::cast(6.0);
                let two = F::cast(2.0);
                for i in 0..cur.nrows() {
                    for k in 0..d_u {
                        let incr = k1[[i, k]] + two * k2[[i, k]] + two * k3[[i, k]] + k4[[i, k]];
                        cur[[i, d_y + k]] += sixth * incr;
                    }
                }
                check_finite(&cur.slice(ndarray::s![.., d_y..]).to_owned(), t)?;
            }
        }
        IntegratorMethod::DopriAdaptive { rtol, atol } => {
            dopri_integrate(field, &mut cur, rtol, atol)?;
        }
    }
    Ok(cur)
}

fn add_scaled_u<F: Scalar>(states: &mut Array2<F>, v: &Array2<F>, h: F, d_y: usize) {
    let d_u = v.ncols();
    for i in 0..states.nrows() {
        for k in 0..d_u {
            states[[i, d_y + k]] += h * v[[i, k]];
        }
    }
}

/// Dormand-Prince 5(4) with standard step control, applied to the whole
/// batch with a shared step size.
fn dopri_integrate<F: Scalar>(
    field: &dyn UVelocityField<F>,
    cur: &mut Array2<F>,
    rtol: F,
    atol: F,
) -> Result<()> {
    let d_y = field.d_y();
    let d_u = field.d_u();
    let n = cur.nrows();
    let c = |v: f64| F::cast(v);
    let a: [&[f64]; 6] = [
        &[1.0 / 5.0],
        &[3.0 / 40.0, 9.0 / 40.0],
        &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
        &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
        &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
        &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    let ct: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    let b5: [f64; 7] =
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    let b4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];

    let mut t = F::zero();
    let mut h = F::cast(1e-2);
    let mut evals = 0usize;
    while t < F::one() {
        if evals > 200_000 {
            return Err(Error::Numeric(format!(
                "adaptive integrator exceeded its evaluation budget at t = {t}"
            )));
        }
        if t + h > F::one() {
            h = F::one() - t;
        }
        let mut ks: Vec<Array2<F>> = Vec::with_capacity(7);
        ks.push(field.u_velocity(t, &cur.view())?);
        for stage in 0..6 {
            let mut trial = cur.clone();
            for (ki, &coef) in ks.iter().zip(a[stage].iter()) {
                add_scaled_u(&mut trial, ki, h * c(coef), d_y);
            }
            ks.push(field.u_velocity(t + c(ct[stage + 1]) * h, &trial.view())?);
        }
        evals += 7;
        // 5th-order proposal and embedded error estimate.
        let mut next = cur.clone();
        for (ki, &coef) in ks.iter().zip(b5.iter()) {
            add_scaled_u(&mut next, ki, h * c(coef), d_y);
        }
        let mut err_sq = F::zero();
        let mut count = 0usize;
        for i in 0..n {
            for k in 0..d_u {
                let mut e = F::zero();
                for (ki, (&cb5, &cb4)) in ks.iter().zip(b5.iter().zip(b4.iter())) {
                    e += (c(cb5) - c(cb4)) * ki[[i, k]];
                }
                e = e * h;
                let scale = atol + rtol * cur[[i, d_y + k]].abs().max(next[[i, d_y + k]].abs());
                let r = e / scale;
                err_sq += r * r;
                count += 1;
            }
        }
        let err = (err_sq / F::cast_usize(count.max(1))).sqrt();
        if err <= F::one() {
            t = t + h;
            *cur = next;
            check_finite(&cur.slice(ndarray::s![.., d_y..]).to_owned(), t)?;
        }
        let factor = if err > F::zero() {
            F::cast(0.9) * err.powf(F::cast(-0.2))
        } else {
            F::cast(5.0)
        };
        h = h * factor.max(F::cast(0.2)).min(F::cast(5.0));
        h = h.max(F::cast(1e-10));
    }
    Ok(())
}

/// Integrate a single initial condition (y, u0); returns u at t = 1.
pub fn integrate<F: Scalar>(
    field: &dyn UVelocityField<F>,
    y: &Array1<F>,
    u0: &Array1<F>,
    cfg: &IntegratorConfig<F>,
) -> Result<Array1<F>> {
    let d_y = field.d_y();
    let d_u = field.d_u();
    if y.len() != d_y || u0.len() != d_u {
        return Err(Error::DimensionMismatch(format!(
            "expected (d_y, d_u) = ({d_y}, {d_u}), got ({}, {})",
            y.len(),
            u0.len()
        )));
    }
    let mut state = Array2::zeros((1, d_y + d_u));
    for (k, v) in y.iter().enumerate() {
        state[[0, k]] = *v;
    }
    for (k, v) in u0.iter().enumerate() {
        state[[0, d_y + k]] = *v;
    }
    let out = integrate_batch(field, &state.view(), cfg)?;
    Ok(out.row(0).slice(ndarray::s![d_y..]).to_owned())
}

/// Draws u₀ for posterior sampling.
pub trait USampler<F> {
    fn d_u(&self) -> usize;
    fn sample(&self, rng: &mut ChaCha8Rng) -> Array1<F>;
}

/// u₀ ~ N(0, I), the product-source default.
pub struct StandardNormalU {
    pub d_u: usize,
}

impl<F: Scalar> USampler<F> for StandardNormalU {
    fn d_u(&self) -> usize {
        self.d_u
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Array1<F> {
        Array1::from_iter((0..self.d_u).map(|_| F::standard_normal(rng)))
    }
}

/// `n` conditional samples for a fixed observation: draw u₀ from the source,
/// integrate each with the same y. Per-sample rngs are derived from the seed
/// by stream counter, so results do not depend on evaluation order.
pub fn sample_posterior<F: Scalar>(
    field: &dyn UVelocityField<F>,
    y: &Array1<F>,
    n: usize,
    source_u: &dyn USampler<F>,
    cfg: &IntegratorConfig<F>,
    seed: u64,
) -> Result<Array2<F>> {
    use rand::SeedableRng;
    let d_y = field.d_y();
    let d_u = field.d_u();
    if y.len() != d_y {
        return Err(Error::DimensionMismatch(format!(
            "observation has {} coords, field expects {d_y}",
            y.len()
        )));
    }
    if source_u.d_u() != d_u {
        return Err(Error::DimensionMismatch("source sampler dimension mismatch".into()));
    }
    if n == 0 {
        return Ok(Array2::zeros((0, d_u)));
    }
    let mut states = Array2::zeros((n, d_y + d_u));
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64 + 1);
        let u0 = source_u.sample(&mut rng);
        for k in 0..d_y {
            states[[i, k]] = y[k];
        }
        for k in 0..d_u {
            states[[i, d_y + k]] = u0[k];
        }
    }
    let out = integrate_batch(field, &states.view(), cfg)?;
    Ok(out.slice(ndarray::s![.., d_y..]).to_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// v(t, y, u) = u, whose exact flow is u(1) = e·u(0).
    struct LinearField;

    impl UVelocityField<f64> for LinearField {
        fn d_y(&self) -> usize {
            1
        }

        fn d_u(&self) -> usize {
            1
        }

        fn u_velocity(&self, _t: f64, states: &ArrayView2<'_, f64>) -> Result<Array2<f64>> {
            let n = states.nrows();
            let mut v = Array2::zeros((n, 1));
            for i in 0..n {
                v[[i, 0]] = states[[i, 1]];
            }
            Ok(v)
        }
    }

    fn rk4(steps: usize) -> IntegratorConfig<f64> {
        IntegratorConfig { method: IntegratorMethod::Rk4, steps }
    }

    #[test]
    fn constant_field_is_exact_for_euler_and_rk4() {
        // Zero-weight network with final bias c outputs the constant c;
        // with a power-of-two step count the quadrature is exact in floats.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut params = VectorFieldParams::<f64>::init(1, 1, 8, 2, &mut rng).unwrap();
        params.layers_mut()[1].b = array![3.0];
        let y = array![0.25];
        let u0 = array![0.5];
        for method in [IntegratorMethod::Euler, IntegratorMethod::Rk4] {
            let cfg = IntegratorConfig { method, steps: 128 };
            let u1 = integrate(&params, &y, &u0, &cfg).unwrap();
            assert_eq!(u1[0], 3.5, "{method:?}");
        }
    }

    #[test]
    fn rk4_matches_exponential_flow() {
        let u1 = integrate(&LinearField, &array![0.0], &array![1.0], &rk4(100)).unwrap();
        let exact = std::f64::consts::E;
        assert!((u1[0] - exact).abs() / exact < 1e-8, "rk4 error {}", (u1[0] - exact).abs());
    }

    #[test]
    fn rk4_halving_reduces_error_sixteen_fold() {
        let exact = std::f64::consts::E;
        let err = |steps: usize| {
            let u1 = integrate(&LinearField, &array![0.0], &array![1.0], &rk4(steps)).unwrap();
            (u1[0] - exact).abs()
        };
        let ratio = err(25) / err(50);
        assert!((12.0..=20.0).contains(&ratio), "order-4 ratio {ratio}");
        // Error is nonincreasing along doubling step counts.
        let mut prev = f64::INFINITY;
        for steps in [10, 20, 40, 80] {
            let e = err(steps);
            assert!(e <= prev);
            prev = e;
        }
    }

    #[test]
    fn dopri_matches_exponential_flow() {
        let cfg = IntegratorConfig {
            method: IntegratorMethod::DopriAdaptive { rtol: 1e-9, atol: 1e-9 },
            steps: 1,
        };
        let u1 = integrate(&LinearField, &array![0.0], &array![1.0], &cfg).unwrap();
        let exact = std::f64::consts::E;
        assert!((u1[0] - exact).abs() < 1e-7, "dopri error {}", (u1[0] - exact).abs());
    }

    #[test]
    fn y_columns_never_change() {
        let states = array![[0.7, 1.0], [-0.3, -2.0], [5.0, 0.1]];
        let out = integrate_batch(&LinearField, &states.view(), &rk4(37)).unwrap();
        for i in 0..3 {
            assert_eq!(out[[i, 0]], states[[i, 0]]);
        }
    }

    #[test]
    fn non_finite_field_aborts_with_time() {
        struct BlowUp;
        impl UVelocityField<f64> for BlowUp {
            fn d_y(&self) -> usize {
                1
            }
            fn d_u(&self) -> usize {
                1
            }
            fn u_velocity(&self, t: f64, states: &ArrayView2<'_, f64>) -> Result<Array2<f64>> {
                let mut v = Array2::zeros((states.nrows(), 1));
                if t > 0.5 {
                    v[[0, 0]] = f64::NAN;
                }
                Ok(v)
            }
        }
        let err = integrate(&BlowUp, &array![0.0], &array![0.0], &rk4(10)).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("t ="), "error should carry the abort time: {msg}");
    }

    #[test]
    fn posterior_sampling_is_deterministic_and_identity_under_zero_field() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let params = VectorFieldParams::<f64>::init(1, 2, 8, 2, &mut rng).unwrap();
        let y = array![0.4];
        let src = StandardNormalU { d_u: 2 };
        let a = sample_posterior(&params, &y, 50, &src, &rk4(16), 7).unwrap();
        let b = sample_posterior(&params, &y, 50, &src, &rk4(16), 7).unwrap();
        assert_eq!(a, b);
        // zero field: the flow is the identity, so outputs are the u0 draws
        let mut direct = Array2::zeros((50, 2));
        use rand::SeedableRng;
        for i in 0..50 {
            let mut r = ChaCha8Rng::seed_from_u64(7);
            r.set_stream(i as u64 + 1);
            let u0: Array1<f64> = USampler::<f64>::sample(&src, &mut r);
            direct.row_mut(i).assign(&u0);
        }
        assert_eq!(a, direct);
        // empty request
        let empty = sample_posterior(&params, &y, 0, &src, &rk4(16), 7).unwrap();
        assert_eq!(empty.nrows(), 0);
    }

    #[test]
    fn rejects_invalid_configs() {
        assert!(rk4(0).validate().is_err());
        let bad = IntegratorConfig {
            method: IntegratorMethod::DopriAdaptive { rtol: 0.0, atol: 1e-6 },
            steps: 1,
        };
        assert!(bad.validate().is_err());
    }
}
