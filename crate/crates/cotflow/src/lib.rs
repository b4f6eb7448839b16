//! Conditional optimal transport flow matching.
//!
//! The crate couples a source to a target measure on a product space Y × U
//! through transport plans that avoid moving mass along Y, measures the
//! resulting conditional Wasserstein geometry (with a closed-form Gaussian
//! oracle), trains a triangular vector field by flow matching on those
//! couplings, and samples conditionals by integrating the learned field.
//! Benchmark data generators, evaluation metrics, and a reference MCMC
//! sampler round out the reproduction harness used by the CLI.
//!
//! All numerics are generic over the [`Scalar`] floating type; the aliases
//! below fix the `f64` instantiation used by the CLI and benchmarks.

pub mod bench;
pub mod cond_wasserstein;
pub mod datasets;
pub mod error;
pub mod flow;
pub mod gaussian;
pub mod io;
pub mod linalg;
pub mod mcmc;
pub mod measure;
pub mod metrics;
pub mod ode;
pub mod ot;
pub mod scalar;

pub use error::{Error, Result};
pub use measure::DiscreteMeasure;
pub use scalar::Scalar;

/// Default scalar type for binaries and benchmarks.
pub type Real = f64;
/// Discrete measure at the default precision.
pub type Measure = DiscreteMeasure<Real>;
/// Transport plan at the default precision.
pub type Plan = ot::CouplingPlan<Real>;
