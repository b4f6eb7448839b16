//! Flow-matching training against transport couplings.
//!
//! Each step draws a source and a target minibatch, couples them (ε-cost
//! transport by default, the independent coupling for the plain
//! flow-matching ablation), samples points on the noisy linear paths between
//! the coupled pairs, and regresses the network onto the per-pair velocity
//! z₁ − z₀ with Adam. Everything is driven by one seed and is reproducible
//! bit for bit.

pub mod adam;
pub mod mlp;
pub mod standardize;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use mlp::{DenseLayer, Gradients, VectorFieldParams};
pub use standardize::Standardizer;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::ot::{cot_coupling, SolveMethod};
use crate::scalar::Scalar;

/// One training point on the stochastic interpolation path.
#[derive(Debug, Clone)]
pub struct PathSample<F> {
    pub t: F,
    pub z_t: Array1<F>,
    pub target_v: Array1<F>,
}

/// z_t = t z₁ + (1−t) z₀ + σ ξ with ξ standard normal; the regression
/// target is z₁ − z₀ regardless of t and ξ.
pub fn sample_path_point<F: Scalar, R: Rng + ?Sized>(
    z0: &ArrayView1<'_, F>,
    z1: &ArrayView1<'_, F>,
    t: F,
    sigma: F,
    rng: &mut R,
) -> Result<PathSample<F>> {
    if z0.len() != z1.len() {
        return Err(Error::DimensionMismatch(format!(
            "path endpoints have lengths {} and {}",
            z0.len(),
            z1.len()
        )));
    }
    if t < F::zero() || t > F::one() {
        return Err(Error::InvalidConfig(format!("path time {t} outside [0, 1]")));
    }
    if sigma < F::zero() {
        return Err(Error::InvalidConfig(format!("path noise scale {sigma} must be >= 0")));
    }
    let dim = z0.len();
    let mut z_t = Array1::zeros(dim);
    let mut target = Array1::zeros(dim);
    let s = F::one() - t;
    for k in 0..dim {
        let noise = if sigma > F::zero() { sigma * F::standard_normal(rng) } else { F::zero() };
        z_t[k] = t * z1[k] + s * z0[k] + noise;
        target[k] = z1[k] - z0[k];
    }
    Ok(PathSample { t, z_t, target_v: target })
}

/// How minibatch pairs are formed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "method")]
pub enum CouplingMethod<F> {
    /// ε-cost transport solved exactly on each minibatch.
    CotExact,
    /// ε-cost transport solved entropically.
    CotSinkhorn { reg: F },
    /// Independent product coupling (the plain flow-matching baseline).
    Independent,
}

/// Periodic held-out W₂ checkpoint selection: every `every` steps the
/// current field generates from `n` held-out source states and is scored
/// against `n` held-out target samples; training returns the best-scoring
/// parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationConfig {
    pub every: usize,
    pub n: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self { every: 500, n: 1000 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, bound = "F: Scalar")]
pub struct TrainConfig<F> {
    /// Path noise scale; the path covariance is σ²·I.
    pub sigma: F,
    /// ε of the coupling cost |Δy|² + ε|Δu|².
    pub epsilon: F,
    pub batch_size: usize,
    pub steps: usize,
    pub learning_rate: F,
    pub seed: u64,
    pub coupling: CouplingMethod<F>,
    pub width: usize,
    pub depth: usize,
    /// Fit a per-coordinate affine standardization on the target data.
    pub standardize: bool,
    /// Precompute one full-dataset coupling when both samplers are finite
    /// datasets of at most this many atoms; larger data is coupled per
    /// minibatch.
    pub full_plan_limit: usize,
    /// Keep the checkpoint with the best held-out W₂ instead of the last.
    pub validation: Option<ValidationConfig>,
}

impl<F: Scalar> Default for TrainConfig<F> {
    fn default() -> Self {
        Self {
            sigma: F::cast(1e-2),
            epsilon: F::cast(1e-2),
            batch_size: 256,
            steps: 4000,
            learning_rate: F::cast(3e-4),
            seed: 0,
            coupling: CouplingMethod::CotExact,
            width: 256,
            depth: 4,
            standardize: true,
            full_plan_limit: 4096,
            validation: None,
        }
    }
}

impl<F: Scalar> TrainConfig<F> {
    pub fn validate(&self) -> Result<()> {
        if self.sigma < F::zero() || !self.sigma.is_finite() {
            return Err(Error::InvalidConfig(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if !(self.epsilon > F::zero()) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if self.steps == 0 {
            return Err(Error::InvalidConfig("steps must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > F::zero()) {
            return Err(Error::InvalidConfig("learning_rate must be > 0".into()));
        }
        if self.width == 0 || self.depth == 0 {
            return Err(Error::InvalidConfig("width and depth must be >= 1".into()));
        }
        if let Some(v) = &self.validation {
            if v.every == 0 || v.n == 0 {
                return Err(Error::InvalidConfig("validation needs every >= 1 and n >= 1".into()));
            }
        }
        Ok(())
    }

    fn solve_method(&self) -> Option<SolveMethod<F>> {
        match self.coupling {
            CouplingMethod::CotExact => Some(SolveMethod::Exact),
            CouplingMethod::CotSinkhorn { reg } => Some(SolveMethod::sinkhorn(reg)),
            CouplingMethod::Independent => None,
        }
    }
}

/// Anything that can produce joint (y, u) batches.
pub trait JointSampler<F> {
    fn d_y(&self) -> usize;
    fn d_u(&self) -> usize;
    /// One batch, rows laid out as (y…, u…).
    fn sample_batch(&self, n: usize, rng: &mut ChaCha8Rng) -> Array2<F>;
    /// The backing dataset, when there is one; enables the precomputed
    /// full-plan path.
    fn finite(&self) -> Option<&DiscreteMeasure<F>> {
        None
    }
}

/// Samples rows of a fixed dataset according to its weights.
pub struct MeasureSampler<F> {
    measure: DiscreteMeasure<F>,
}

impl<F: Scalar> MeasureSampler<F> {
    pub fn new(measure: DiscreteMeasure<F>) -> Self {
        Self { measure }
    }
}

impl<F: Scalar> JointSampler<F> for MeasureSampler<F> {
    fn d_y(&self) -> usize {
        self.measure.d_y()
    }

    fn d_u(&self) -> usize {
        self.measure.d_u()
    }

    fn sample_batch(&self, n: usize, rng: &mut ChaCha8Rng) -> Array2<F> {
        let idx = self.measure.sample_indices(n, rng);
        let dim = self.measure.dim();
        let mut out = Array2::zeros((n, dim));
        for (row, &i) in idx.iter().enumerate() {
            out.row_mut(row).assign(&self.measure.point(i));
        }
        out
    }

    fn finite(&self) -> Option<&DiscreteMeasure<F>> {
        Some(&self.measure)
    }
}

/// The product source η = (Y-marginal of the target) ⊗ N(0, I): y values are
/// resampled from a pool, u coordinates are fresh standard normals on every
/// draw.
pub struct ProductSourceSampler<F> {
    y_pool: Array2<F>,
    d_u: usize,
}

impl<F: Scalar> ProductSourceSampler<F> {
    /// `y_pool` holds one y-row per pooled sample.
    pub fn new(y_pool: Array2<F>, d_u: usize) -> Result<Self> {
        if y_pool.nrows() == 0 || y_pool.ncols() == 0 || d_u == 0 {
            return Err(Error::InvalidConfig("product source needs a nonempty y pool".into()));
        }
        Ok(Self { y_pool, d_u })
    }

    /// Pool the y-block of an existing joint dataset.
    pub fn from_measure(target: &DiscreteMeasure<F>) -> Self {
        Self { y_pool: target.y_block().to_owned(), d_u: target.d_u() }
    }
}

impl<F: Scalar> JointSampler<F> for ProductSourceSampler<F> {
    fn d_y(&self) -> usize {
        self.y_pool.ncols()
    }

    fn d_u(&self) -> usize {
        self.d_u
    }

    fn sample_batch(&self, n: usize, rng: &mut ChaCha8Rng) -> Array2<F> {
        let d_y = self.y_pool.ncols();
        let mut out = Array2::zeros((n, d_y + self.d_u));
        let pool = self.y_pool.nrows();
        for row in 0..n {
            let i = rng.random_range(0..pool);
            for k in 0..d_y {
                out[[row, k]] = self.y_pool[[i, k]];
            }
            for k in 0..self.d_u {
                out[[row, d_y + k]] = F::standard_normal(rng);
            }
        }
        out
    }
}

/// Trained field plus everything needed to run it on raw coordinates.
#[derive(Debug, Clone)]
pub struct TrainedModel<F> {
    pub params: VectorFieldParams<F>,
    pub standardizer: Standardizer<F>,
    pub config: TrainConfig<F>,
    pub loss_trace: Vec<F>,
    /// (step, held-out W₂) pairs when checkpoint selection is enabled.
    pub validation_trace: Vec<(usize, F)>,
}

impl<F: Scalar> TrainedModel<F> {
    /// U-velocities for a batch of raw states at time `t`. Standardization
    /// and its inverse happen inside: the network sees standardized inputs,
    /// and its output is rescaled to act on raw u coordinates.
    pub fn velocity_batch(&self, t: F, states: &ArrayView2<'_, F>) -> Result<Array2<F>> {
        let d_y = self.params.d_y();
        let d_u = self.params.d_u();
        if states.ncols() != d_y + d_u {
            return Err(Error::DimensionMismatch(format!(
                "state rows have {} coords, expected {}",
                states.ncols(),
                d_y + d_u
            )));
        }
        let std_states = self.standardizer.transform(states);
        let n = states.nrows();
        let mut x = Array2::zeros((n, 1 + d_y + d_u));
        for i in 0..n {
            x[[i, 0]] = t;
            for k in 0..(d_y + d_u) {
                x[[i, 1 + k]] = std_states[[i, k]];
            }
        }
        let out = self.params.forward_batch(&x.view())?;
        let u_scales = self.standardizer.u_scales(d_y);
        let mut vel = out;
        for mut row in vel.rows_mut() {
            for (k, v) in row.iter_mut().enumerate() {
                *v = *v * u_scales[k];
            }
        }
        Ok(vel)
    }
}

/// Flow-matching training loop with transport couplings.
pub fn train<F: Scalar>(
    source: &dyn JointSampler<F>,
    target: &dyn JointSampler<F>,
    cfg: &TrainConfig<F>,
) -> Result<TrainedModel<F>> {
    cfg.validate()?;
    if source.d_y() != target.d_y() || source.d_u() != target.d_u() {
        return Err(Error::DimensionMismatch(
            "source and target samplers disagree on (d_y, d_u)".into(),
        ));
    }
    let d_y = target.d_y();
    let d_u = target.d_u();
    let dim = d_y + d_u;

    // Independent rng streams: init, standardizer fit, data, paths.
    let stream = |s: u64| {
        let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
        r.set_stream(s);
        r
    };
    let mut rng_init = stream(0);
    let mut rng_fit = stream(1);
    let mut rng_data = stream(2);
    let mut rng_path = stream(3);

    let standardizer = if cfg.standardize {
        let fit_n = 8192.min(cfg.batch_size.max(512) * 8);
        let sample = target.sample_batch(fit_n, &mut rng_fit);
        Standardizer::fit(&sample.view())?
    } else {
        Standardizer::identity(dim)
    };

    let mut params = VectorFieldParams::init(d_y, d_u, cfg.width, cfg.depth, &mut rng_init)?;
    let mut adam_state = AdamState::new(&params);
    let adam_cfg = AdamConfig::with_lr(cfg.learning_rate);
    let mut loss_trace = Vec::with_capacity(cfg.steps);

    // Full-plan precompute applies to finite datasets small enough to couple
    // in one solve; otherwise couple per minibatch.
    let full_plan = match (cfg.solve_method(), source.finite(), target.finite()) {
        (Some(method), Some(src), Some(tgt))
            if src.len() <= cfg.full_plan_limit && tgt.len() <= cfg.full_plan_limit =>
        {
            let src_std = DiscreteMeasure::new(
                standardizer.transform(&src.points()),
                src.weights().to_owned(),
                d_y,
                d_u,
            )?;
            let tgt_std = DiscreteMeasure::new(
                standardizer.transform(&tgt.points()),
                tgt.weights().to_owned(),
                d_y,
                d_u,
            )?;
            let plan = cot_coupling(&src_std, &tgt_std, cfg.epsilon, method)?;
            Some((src_std, tgt_std, plan))
        }
        _ => None,
    };

    // Held-out data for checkpoint selection, standardized once.
    let mut rng_val = stream(4);
    let mut best: Option<(F, VectorFieldParams<F>)> = None;
    let mut validation_trace: Vec<(usize, F)> = Vec::new();
    let val_data = cfg.validation.map(|v| {
        let s = standardizer.transform(&source.sample_batch(v.n, &mut rng_val).view());
        let t = standardizer.transform(&target.sample_batch(v.n, &mut rng_val).view());
        (s, t)
    });

    let b = cfg.batch_size;
    let mut x = Array2::zeros((b, 1 + dim));
    let mut targets = Array2::zeros((b, d_u));
    for step in 0..cfg.steps {
        // Assemble the coupled endpoint pairs for this step.
        let (z0, z1, pairs): (Array2<F>, Array2<F>, Vec<(usize, usize)>) =
            if let Some((src_std, tgt_std, plan)) = &full_plan {
                let pairs = plan.sample_pairs(b, &mut rng_data)?;
                (src_std.points().to_owned(), tgt_std.points().to_owned(), pairs)
            } else {
                let zs = standardizer.transform(&source.sample_batch(b, &mut rng_data).view());
                let zt = standardizer.transform(&target.sample_batch(b, &mut rng_data).view());
                let pairs = match cfg.solve_method() {
                    None => (0..b).map(|i| (i, i)).collect(),
                    Some(method) => {
                        let ms = DiscreteMeasure::uniform(zs.clone(), d_y, d_u)?;
                        let mt = DiscreteMeasure::uniform(zt.clone(), d_y, d_u)?;
                        let plan = cot_coupling(&ms, &mt, cfg.epsilon, method)?;
                        plan.sample_pairs(b, &mut rng_data)?
                    }
                };
                (zs, zt, pairs)
            };

        for (row, &(i, j)) in pairs.iter().enumerate() {
            let t: F = rng_path.random_range(F::zero()..F::one());
            let ps = sample_path_point(&z0.row(i), &z1.row(j), t, cfg.sigma, &mut rng_path)?;
            x[[row, 0]] = ps.t;
            for k in 0..dim {
                x[[row, 1 + k]] = ps.z_t[k];
            }
            for k in 0..d_u {
                targets[[row, k]] = ps.target_v[d_y + k];
            }
        }

        let (loss, grads) = params.loss_and_grad(&x.view(), &targets.view())?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("training loss at step {step}")));
        }
        adam_step(&mut params, &grads, &mut adam_state, &adam_cfg);
        loss_trace.push(loss);

        if let (Some(v), Some((val_states, val_target))) = (cfg.validation, &val_data) {
            if (step + 1) % v.every == 0 || step + 1 == cfg.steps {
                let generated = rk4_standardized(&params, val_states, 20)?;
                let w2 = crate::metrics::w2_empirical(
                    &generated.view(),
                    &val_target.view(),
                    cfg.seed,
                )?;
                validation_trace.push((step + 1, w2));
                if best.as_ref().map_or(true, |(b, _)| w2 < *b) {
                    best = Some((w2, params.clone()));
                }
            }
        }
    }
    if let Some((_, selected)) = best {
        params = selected;
    }

    Ok(TrainedModel { params, standardizer, config: cfg.clone(), loss_trace, validation_trace })
}

/// Fixed-step RK4 of the standardized-space flow; used for checkpoint
/// selection (the selection metric only needs to be scale-consistent).
fn rk4_standardized<F: Scalar>(
    params: &VectorFieldParams<F>,
    states0: &Array2<F>,
    steps: usize,
) -> Result<Array2<F>> {
    let d_y = params.d_y();
    let d_u = params.d_u();
    let dim = d_y + d_u;
    let n = states0.nrows();
    let mut cur = states0.clone();
    let h = F::one() / F::cast_usize(steps);
    let half = h / F::cast(2.0);
    let two = F::cast(2.0);
    let eval = |params: &VectorFieldParams<F>, t: F, states: &Array2<F>| -> Result<Array2<F>> {
        let mut x = Array2::zeros((n, 1 + dim));
        for i in 0..n {
            x[[i, 0]] = t;
            for k in 0..dim {
                x[[i, 1 + k]] = states[[i, k]];
            }
        }
        params.forward_batch(&x.view())
    };
    let bump = |states: &Array2<F>, k: &Array2<F>, h: F| -> Array2<F> {
        let mut out = states.clone();
        for i in 0..n {
            for c in 0..d_u {
                out[[i, d_y + c]] += h * k[[i, c]];
            }
        }
        out
    };
    for s in 0..steps {
        let t = F::cast_usize(s) * h;
        let k1 = eval(params, t, &cur)?;
        let k2 = eval(params, t + half, &bump(&cur, &k1, half))?;
        let k3 = eval(params, t + half, &bump(&cur, &k2, half))?;
        let k4 = eval(params, t + h, &bump(&cur, &k3, h))?;
        for i in 0..n {
            for c in 0..d_u {
                let incr = k1[[i, c]] + two * k2[[i, c]] + two * k3[[i, c]] + k4[[i, c]];
                cur[[i, d_y + c]] += h / F::cast(6.0) * incr;
            }
        }
    }
    Ok(cur)
}
