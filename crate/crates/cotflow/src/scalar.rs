//! Floating-point abstraction for the numerical core.
//!
//! Everything numeric in this crate is generic over [`Scalar`], which is
//! implemented for `f32` and `f64`. Concrete type aliases live at the crate
//! root; `f64` is the default used by the CLI and benchmarks.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use rand::distr::uniform::SampleUniform;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{de::DeserializeOwned, Serialize};

/// Scalar type for all numerical routines: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum<Self>
    + for<'a> Sum<&'a Self>
    + SampleUniform
    + Serialize
    + DeserializeOwned
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`; panics only on values outside the
    /// target type's range (never the case for the constants this crate uses).
    fn cast(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 constant not representable")
    }

    /// Conversion from a count.
    fn cast_usize(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize not representable")
    }

    /// Widening conversion used for reporting and cross-type comparisons.
    fn to_f64_lossy(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).expect("scalar not representable as f64")
    }

    /// One draw from N(0, 1).
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Tolerance for "weights sum to one" checks: 1e-12 for f64, scaled up
    /// for f32 where 1e-12 is below machine epsilon.
    fn weight_sum_tol() -> Self {
        Self::cast(1e-12).max(Self::epsilon() * Self::cast(64.0))
    }
}

impl Scalar for f64 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

impl Scalar for f32 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

/// Compensated (Kahan) summation; keeps weight checks at the stated
/// tolerances independently of the number of atoms.
pub fn kahan_sum<F: Scalar>(values: impl IntoIterator<Item = F>) -> F {
    let mut sum = F::zero();
    let mut c = F::zero();
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}
