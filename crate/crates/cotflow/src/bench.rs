//! End-to-end benchmark harnesses: the 2D synthetic suite (train, generate,
//! score W₂/MMD against held-out target samples across several test sets)
//! and the Lotka-Volterra inverse problem (train on simulated pairs, draw
//! posterior samples for a fixed observation, compare against DE-MC).

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::{
    fresh_y_pool, lv_dataset, lv_observe, lv_prior_sample, lv_simulate, sample_2d, LvParams,
    Synthetic2D, Synthetic2DSpec, LV_DEFAULT_STEP, LV_NOISE_VAR, LV_P0,
};
use crate::error::{Error, Result};
use crate::flow::{
    train, CouplingMethod, JointSampler, MeasureSampler, ProductSourceSampler, TrainConfig,
    TrainedModel,
};
use crate::mcmc::{de_mc_sample, lv_log_posterior, DeMcConfig};
use crate::metrics::{mmd_squared, w2_empirical, MmdConfig};
use crate::ode::{integrate_batch, sample_posterior, IntegratorConfig, StandardNormalU};
use crate::scalar::Scalar;

/// Positivity clamp applied to generated parameters before taking logs or
/// simulating; counted in the result.
const PARAM_FLOOR: f64 = 1e-6;

pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len().max(1) as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Synthetic2DBenchOptions<F> {
    pub dataset: Synthetic2D,
    pub n_train: usize,
    pub n_test: usize,
    pub n_test_sets: usize,
    pub train: TrainConfig<F>,
    pub with_fm_baseline: bool,
    pub integrator: IntegratorConfig<F>,
    pub seed: u64,
}

impl<F: Scalar> Synthetic2DBenchOptions<F> {
    pub fn new(dataset: Synthetic2D) -> Self {
        Self {
            dataset,
            n_train: 20_000,
            n_test: 5_000,
            n_test_sets: 5,
            train: TrainConfig::default(),
            with_fm_baseline: true,
            integrator: IntegratorConfig::default(),
            seed: 0,
        }
    }
}

/// Per-test-set scores for one model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreSet {
    pub w2: Vec<f64>,
    pub mmd: Vec<f64>,
}

impl ScoreSet {
    pub fn w2_mean_sd(&self) -> (f64, f64) {
        mean_sd(&self.w2)
    }

    pub fn mmd_mean_sd(&self) -> (f64, f64) {
        mean_sd(&self.mmd)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Synthetic2DBenchResult {
    pub dataset: String,
    pub cot_fm: ScoreSet,
    pub fm: Option<ScoreSet>,
    pub final_loss_cot_fm: f64,
}

/// Generate from a trained model for one test seed and score it against a
/// fresh reference sample.
fn score_2d_model<F: Scalar>(
    model: &TrainedModel<F>,
    opts: &Synthetic2DBenchOptions<F>,
    set: usize,
) -> Result<(f64, f64)> {
    let ref_spec = Synthetic2DSpec {
        name: opts.dataset,
        n: opts.n_test,
        seed: opts.seed.wrapping_add(1000 + set as u64),
    };
    let reference = sample_2d::<F>(&ref_spec)?;
    // Source states: fresh y draws from the target marginal, u₀ ~ N(0, 1).
    let src_spec = Synthetic2DSpec {
        name: opts.dataset,
        n: opts.n_test,
        seed: opts.seed.wrapping_add(2000 + set as u64),
    };
    let fresh = sample_2d::<F>(&src_spec)?;
    let mut states = Array2::zeros((opts.n_test, 2));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(4000 + set as u64);
    for i in 0..opts.n_test {
        states[[i, 0]] = fresh.y(i)[0];
        states[[i, 1]] = F::standard_normal(&mut rng);
    }
    let generated = integrate_batch(model, &states.view(), &opts.integrator)?;

    let w2 = w2_empirical(&generated.view(), &reference.points(), opts.seed.wrapping_add(set as u64))?
        .to_f64_lossy();
    let mmd = mmd_squared(
        &generated.view(),
        &reference.points(),
        &MmdConfig::default(),
        opts.seed.wrapping_add(set as u64),
    )?
    .to_f64_lossy();
    Ok((w2, mmd))
}

/// Train COT-FM (and optionally the independent-coupling FM baseline) on one
/// 2D dataset and score both across the test sets.
pub fn run_2d_benchmark<F: Scalar>(
    opts: &Synthetic2DBenchOptions<F>,
) -> Result<Synthetic2DBenchResult> {
    let target_spec =
        Synthetic2DSpec { name: opts.dataset, n: opts.n_train, seed: opts.seed };
    let target_data = sample_2d::<F>(&target_spec)?;
    let y_pool = fresh_y_pool::<F>(&target_spec, opts.n_train)?;
    let target = MeasureSampler::new(target_data);
    let source = ProductSourceSampler::new(y_pool, 1)?;

    let run_one = |coupling: CouplingMethod<F>| -> Result<(TrainedModel<F>, ScoreSet)> {
        let cfg = TrainConfig { coupling, ..opts.train.clone() };
        let model = train(&source as &dyn JointSampler<F>, &target, &cfg)?;
        let mut scores = ScoreSet { w2: Vec::new(), mmd: Vec::new() };
        for set in 0..opts.n_test_sets {
            let (w2, mmd) = score_2d_model(&model, opts, set)?;
            scores.w2.push(w2);
            scores.mmd.push(mmd);
        }
        Ok((model, scores))
    };

    let (cot_model, cot_scores) = run_one(opts.train.coupling)?;
    let fm_scores = if opts.with_fm_baseline {
        Some(run_one(CouplingMethod::Independent)?.1)
    } else {
        None
    };
    Ok(Synthetic2DBenchResult {
        dataset: opts.dataset.name().to_string(),
        cot_fm: cot_scores,
        fm: fm_scores,
        final_loss_cot_fm: cot_model
            .loss_trace
            .last()
            .map(|l| l.to_f64_lossy())
            .unwrap_or(f64::NAN),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct LvBenchOptions<F> {
    pub n_train: usize,
    pub n_posterior: usize,
    pub train: TrainConfig<F>,
    pub mcmc: DeMcConfig<F>,
    pub integrator: IntegratorConfig<F>,
    pub seed: u64,
}

impl<F: Scalar> Default for LvBenchOptions<F> {
    fn default() -> Self {
        Self {
            n_train: 10_000,
            n_posterior: 1000,
            train: TrainConfig::default(),
            mcmc: DeMcConfig { n_chains: 16, n_steps: 6000, burn_in: 2000, ..DeMcConfig::default() },
            integrator: IntegratorConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LvBenchResult {
    /// W₂ between COT-FM and DE-MC samples in log-parameter space.
    pub w2_log_params: f64,
    /// MMD between the same sample sets.
    pub mmd_log_params: f64,
    /// Median over posterior samples of the log-trajectory MSE to the
    /// observation.
    pub posterior_pred_mse_median: f64,
    /// Same for fresh prior samples.
    pub prior_pred_mse_median: f64,
    /// prior / posterior median predictive MSE.
    pub pred_mse_ratio: f64,
    pub mcmc_acceptance_mean: f64,
    /// Generated parameters clamped to the positivity floor before logs.
    pub clamped_samples: usize,
    pub true_params: [f64; 4],
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    xs[xs.len() / 2]
}

/// Predictive log-trajectory MSE of one parameter draw against log y.
fn predictive_mse<F: Scalar>(params: &LvParams<F>, log_y: &Array1<F>) -> Result<f64> {
    let traj = lv_simulate(params, (F::cast(LV_P0.0), F::cast(LV_P0.1)), F::cast(LV_DEFAULT_STEP))?;
    let mut acc = 0.0f64;
    for (z, ly) in traj.values.iter().zip(log_y.iter()) {
        let d = z.ln().to_f64_lossy() - ly.to_f64_lossy();
        acc += d * d;
    }
    Ok(acc / log_y.len() as f64)
}

/// Full Lotka-Volterra pipeline: simulate training data, fit COT-FM, sample
/// the posterior at the benchmark observation, and compare against DE-MC.
pub fn run_lv_benchmark<F: Scalar>(opts: &LvBenchOptions<F>) -> Result<LvBenchResult> {
    let data = lv_dataset::<F>(opts.n_train, opts.seed)?;
    let source = ProductSourceSampler::from_measure(&data);
    let target = MeasureSampler::new(data);
    let model = train(&source as &dyn JointSampler<F>, &target, &opts.train)?;

    // The benchmark observation.
    let true_params = LvParams::<F>::benchmark();
    let traj = lv_simulate(&true_params, (F::cast(LV_P0.0), F::cast(LV_P0.1)), F::cast(LV_DEFAULT_STEP))?;
    let mut rng_obs = ChaCha8Rng::seed_from_u64(opts.seed);
    rng_obs.set_stream(7777);
    let y_obs = lv_observe(&traj.values, F::cast(LV_NOISE_VAR).sqrt(), &mut rng_obs)?;
    let log_y = y_obs.mapv(|v| v.ln());

    // COT-FM posterior samples.
    let source_u = StandardNormalU { d_u: 4 };
    let u_samples = sample_posterior(
        &model,
        &y_obs,
        opts.n_posterior,
        &source_u,
        &opts.integrator,
        opts.seed.wrapping_add(1),
    )?;
    let floor = F::cast(PARAM_FLOOR);
    let mut clamped = 0usize;
    let mut log_cot = Array2::zeros(u_samples.dim());
    let mut cot_params = Vec::with_capacity(opts.n_posterior);
    for i in 0..u_samples.nrows() {
        let mut row = [F::zero(); 4];
        for k in 0..4 {
            let mut v = u_samples[[i, k]];
            if v < floor {
                v = floor;
                clamped += 1;
            }
            log_cot[[i, k]] = v.ln();
            row[k] = v;
        }
        cot_params.push(LvParams::new(row[0], row[1], row[2], row[3])?);
    }

    // DE-MC reference in log-parameter space, initialized from the prior.
    let mut rng_init = ChaCha8Rng::seed_from_u64(opts.seed);
    rng_init.set_stream(8888);
    let init: Vec<Array1<F>> = lv_prior_sample::<F>(opts.mcmc.n_chains, &mut rng_init)
        .into_iter()
        .map(|p| Array1::from_iter(p.to_array().iter().map(|v| v.ln())))
        .collect();
    let logp = |x: &Array1<F>| lv_log_posterior(x, &y_obs);
    let mcmc_cfg = DeMcConfig { seed: opts.seed.wrapping_add(2), ..opts.mcmc.clone() };
    let chains = de_mc_sample(&logp, &mcmc_cfg, &init)?;
    let total_rows = chains.samples.nrows();
    if total_rows < opts.n_posterior {
        return Err(Error::InvalidConfig(format!(
            "MCMC kept {total_rows} samples, fewer than the {} requested",
            opts.n_posterior
        )));
    }
    let gens = total_rows / chains.n_chains;
    let keep_gens = opts.n_posterior.div_ceil(chains.n_chains);
    let thin = (gens / keep_gens).max(1);
    let thinned = chains.thin(thin);
    let skip = thinned.nrows() - opts.n_posterior;
    let log_mcmc = thinned.slice(ndarray::s![skip.., ..]).to_owned();

    let w2_log = w2_empirical(&log_cot.view(), &log_mcmc.view(), opts.seed)?.to_f64_lossy();
    let mmd_log =
        mmd_squared(&log_cot.view(), &log_mcmc.view(), &MmdConfig::default(), opts.seed)?
            .to_f64_lossy();

    // Posterior-predictive check against fresh prior draws.
    let mut post_mse = Vec::with_capacity(cot_params.len());
    for p in &cot_params {
        post_mse.push(predictive_mse(p, &log_y)?);
    }
    let mut rng_prior = ChaCha8Rng::seed_from_u64(opts.seed);
    rng_prior.set_stream(9999);
    let mut prior_mse = Vec::with_capacity(opts.n_posterior);
    for p in lv_prior_sample::<F>(opts.n_posterior, &mut rng_prior) {
        prior_mse.push(predictive_mse(&p, &log_y)?);
    }
    let post_med = median(post_mse);
    let prior_med = median(prior_mse);
    let acc_mean = chains.acceptance.iter().map(|a| a.to_f64_lossy()).sum::<f64>()
        / chains.acceptance.len() as f64;
    let tp = true_params.to_array();
    Ok(LvBenchResult {
        w2_log_params: w2_log,
        mmd_log_params: mmd_log,
        posterior_pred_mse_median: post_med,
        prior_pred_mse_median: prior_med,
        pred_mse_ratio: prior_med / post_med,
        mcmc_acceptance_mean: acc_mean,
        clamped_samples: clamped,
        true_params: [
            tp[0].to_f64_lossy(),
            tp[1].to_f64_lossy(),
            tp[2].to_f64_lossy(),
            tp[3].to_f64_lossy(),
        ],
    })
}
