//! Differential-evolution Metropolis MCMC and the Lotka-Volterra
//! log-posterior it targets.
//!
//! Chains advance in lockstep generations. Chain i proposes
//! x' = x_i + γ (x_a − x_b) + jitter, with the donor pair (a, b) drawn
//! uniformly without replacement from the previous generation's other
//! chains; the jump is symmetric so plain Metropolis acceptance applies.
//! Every tenth generation γ is set to 1 to allow mode jumps.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::{
    lv_simulate, LvParams, LV_DEFAULT_STEP, LV_NOISE_VAR, LV_OBS_DIM, LV_P0, LV_PRIOR_MEAN,
    LV_PRIOR_VAR,
};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, bound = "F: Scalar")]
pub struct DeMcConfig<F> {
    pub n_chains: usize,
    /// Jump scale; `None` uses the standard 2.38/√(2·dim).
    pub gamma_scale: Option<F>,
    pub jitter_sd: F,
    pub n_steps: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Every this-many generations the jump scale is 1.0.
    pub gamma_one_every: usize,
}

impl<F: Scalar> Default for DeMcConfig<F> {
    fn default() -> Self {
        Self {
            n_chains: 16,
            gamma_scale: None,
            jitter_sd: F::cast(1e-4),
            n_steps: 10_000,
            burn_in: 2_000,
            seed: 0,
            gamma_one_every: 10,
        }
    }
}

impl<F: Scalar> DeMcConfig<F> {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.n_chains < 3 {
            return Err(Error::InvalidConfig("DE-MC needs at least 3 chains".into()));
        }
        if self.n_chains < 2 * dim + 1 {
            return Err(Error::InvalidConfig(format!(
                "DE-MC wants n_chains >= 2·dim + 1 = {} for a {dim}-dimensional target",
                2 * dim + 1
            )));
        }
        if self.burn_in >= self.n_steps {
            return Err(Error::InvalidConfig("burn_in must be smaller than n_steps".into()));
        }
        if self.jitter_sd < F::zero() {
            return Err(Error::InvalidConfig("jitter_sd must be >= 0".into()));
        }
        if self.gamma_one_every == 0 {
            return Err(Error::InvalidConfig("gamma_one_every must be >= 1".into()));
        }
        Ok(())
    }

    pub fn gamma(&self, dim: usize) -> F {
        self.gamma_scale
            .unwrap_or_else(|| F::cast(2.38) / (F::cast(2.0) * F::cast_usize(dim)).sqrt())
    }
}

#[derive(Debug, Clone)]
pub struct DeMcResult<F> {
    /// Post-burn-in states, generation-major: row g·n_chains + i is chain i
    /// at kept generation g.
    pub samples: Array2<F>,
    pub acceptance: Vec<F>,
    pub n_chains: usize,
}

impl<F: Scalar> DeMcResult<F> {
    /// Every k-th kept generation, all chains.
    pub fn thin(&self, k: usize) -> Array2<F> {
        let k = k.max(1);
        let gens = self.samples.nrows() / self.n_chains;
        let kept: Vec<usize> = (0..gens).step_by(k).collect();
        let mut out = Array2::zeros((kept.len() * self.n_chains, self.samples.ncols()));
        for (gi, &g) in kept.iter().enumerate() {
            for c in 0..self.n_chains {
                out.row_mut(gi * self.n_chains + c)
                    .assign(&self.samples.row(g * self.n_chains + c));
            }
        }
        out
    }
}

/// Donor pair for chain `i`: uniform over ordered pairs of distinct other
/// chains. Swapping the pair negates the jump.
fn draw_donors<R: Rng + ?Sized>(rng: &mut R, n_chains: usize, i: usize) -> (usize, usize) {
    let a = loop {
        let c = rng.random_range(0..n_chains);
        if c != i {
            break c;
        }
    };
    let b = loop {
        let c = rng.random_range(0..n_chains);
        if c != i && c != a {
            break c;
        }
    };
    (a, b)
}

/// Run DE-MC on a log-density. `init` supplies one distinct state per chain.
pub fn de_mc_sample<F: Scalar>(
    logp: &dyn Fn(&Array1<F>) -> F,
    cfg: &DeMcConfig<F>,
    init: &[Array1<F>],
) -> Result<DeMcResult<F>> {
    if init.len() != cfg.n_chains {
        return Err(Error::InvalidConfig(format!(
            "got {} initial states for {} chains",
            init.len(),
            cfg.n_chains
        )));
    }
    let dim = init.first().map(|s| s.len()).unwrap_or(0);
    if dim == 0 || init.iter().any(|s| s.len() != dim) {
        return Err(Error::DimensionMismatch("initial states must share a positive dim".into()));
    }
    for i in 0..init.len() {
        for j in (i + 1)..init.len() {
            if init[i] == init[j] {
                return Err(Error::InvalidConfig(format!(
                    "initial states {i} and {j} coincide; DE-MC needs distinct chains"
                )));
            }
        }
    }
    cfg.validate(dim)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let gamma_base = cfg.gamma(dim);
    let mut states: Vec<Array1<F>> = init.to_vec();
    let mut logps: Vec<F> = states.iter().map(|s| logp(s)).collect();
    let kept_gens = cfg.n_steps - cfg.burn_in;
    let mut samples = Array2::zeros((kept_gens * cfg.n_chains, dim));
    let mut accepts = vec![0usize; cfg.n_chains];

    for gen in 0..cfg.n_steps {
        let gamma = if (gen + 1) % cfg.gamma_one_every == 0 { F::one() } else { gamma_base };
        let prev = states.clone();
        let prev_logps = logps.clone();
        for i in 0..cfg.n_chains {
            let (a, b) = draw_donors(&mut rng, cfg.n_chains, i);
            let mut prop = prev[i].clone();
            for k in 0..dim {
                let jitter = if cfg.jitter_sd > F::zero() {
                    cfg.jitter_sd * F::standard_normal(&mut rng)
                } else {
                    F::zero()
                };
                prop[k] = prev[i][k] + gamma * (prev[a][k] - prev[b][k]) + jitter;
            }
            let lp = logp(&prop);
            let log_u: F = rng.random_range(F::zero()..F::one()).max(F::cast(1e-300)).ln();
            if lp.is_finite() && log_u < lp - prev_logps[i] {
                states[i] = prop;
                logps[i] = lp;
                accepts[i] += 1;
            } else {
                states[i] = prev[i].clone();
                logps[i] = prev_logps[i];
            }
        }
        if gen >= cfg.burn_in {
            let g = gen - cfg.burn_in;
            for (i, s) in states.iter().enumerate() {
                samples.row_mut(g * cfg.n_chains + i).assign(s);
            }
        }
    }

    let acceptance = accepts
        .iter()
        .map(|&a| F::cast_usize(a) / F::cast_usize(cfg.n_steps))
        .collect();
    Ok(DeMcResult { samples, acceptance, n_chains: cfg.n_chains })
}

/// Effective sample size of one scalar chain via the initial positive
/// sequence estimator.
pub fn effective_sample_size<F: Scalar>(series: &[F]) -> F {
    let n = series.len();
    if n < 4 {
        return F::cast_usize(n);
    }
    let nf = F::cast_usize(n);
    let mean = series.iter().copied().sum::<F>() / nf;
    let var = series.iter().map(|&x| (x - mean) * (x - mean)).sum::<F>() / nf;
    if !(var > F::zero()) {
        return F::one();
    }
    let auto = |lag: usize| -> F {
        let mut s = F::zero();
        for i in 0..(n - lag) {
            s += (series[i] - mean) * (series[i + lag] - mean);
        }
        s / (nf * var)
    };
    let mut sum_rho = F::zero();
    let mut lag = 1;
    while lag + 1 < n / 2 {
        let pair = auto(lag) + auto(lag + 1);
        if pair <= F::zero() {
            break;
        }
        sum_rho += pair;
        lag += 2;
    }
    (nf / (F::one() + F::cast(2.0) * sum_rho)).max(F::one())
}

/// Log-posterior of the Lotka-Volterra inverse problem in log-parameter
/// space: Gaussian prior on log u plus the log-normal observation
/// likelihood. Simulator blow-ups reject via −∞.
pub fn lv_log_posterior<F: Scalar>(log_params: &Array1<F>, y_obs: &Array1<F>) -> F {
    let neg_inf = F::neg_infinity();
    if log_params.len() != 4 || y_obs.len() != LV_OBS_DIM {
        return neg_inf;
    }
    if log_params.iter().chain(y_obs.iter()).any(|v| !v.is_finite()) {
        return neg_inf;
    }
    let tau_prior = F::cast(LV_PRIOR_VAR);
    let tau_noise = F::cast(LV_NOISE_VAR);
    let two_pi = F::cast(2.0 * std::f64::consts::PI);
    let mut lp = F::zero();
    for (k, &m) in LV_PRIOR_MEAN.iter().enumerate() {
        let d = log_params[k] - F::cast(m);
        lp += -F::cast(0.5) * (two_pi * tau_prior).ln() - d * d / (F::cast(2.0) * tau_prior);
    }
    let params = match LvParams::from_log(log_params.as_slice().expect("contiguous")) {
        Ok(p) => p,
        Err(_) => return neg_inf,
    };
    let traj = match lv_simulate(&params, (F::cast(LV_P0.0), F::cast(LV_P0.1)), F::cast(LV_DEFAULT_STEP)) {
        Ok(t) => t,
        Err(_) => return neg_inf,
    };
    for (yi, zi) in y_obs.iter().zip(traj.values.iter()) {
        if !(*yi > F::zero()) || !(*zi > F::zero()) {
            return neg_inf;
        }
        let d = yi.ln() - zi.ln();
        lp += -F::cast(0.5) * (two_pi * tau_noise).ln() - d * d / (F::cast(2.0) * tau_noise);
    }
    lp
}
