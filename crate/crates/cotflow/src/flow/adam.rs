//! Adam optimizer over the layered parameter layout.

use ndarray::{Array1, Array2};

use crate::flow::mlp::{Gradients, VectorFieldParams};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct AdamConfig<F> {
    pub lr: F,
    pub beta1: F,
    pub beta2: F,
    pub eps: F,
}

impl<F: Scalar> AdamConfig<F> {
    pub fn with_lr(lr: F) -> Self {
        Self { lr, beta1: F::cast(0.9), beta2: F::cast(0.999), eps: F::cast(1e-8) }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState<F> {
    m: Vec<(Array2<F>, Array1<F>)>,
    v: Vec<(Array2<F>, Array1<F>)>,
    step: u64,
}

impl<F: Scalar> AdamState<F> {
    pub fn new(params: &VectorFieldParams<F>) -> Self {
        let zeros: Vec<(Array2<F>, Array1<F>)> = params
            .layers()
            .iter()
            .map(|l| (Array2::zeros(l.w.dim()), Array1::zeros(l.b.len())))
            .collect();
        Self { m: zeros.clone(), v: zeros, step: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One Adam update with bias correction. Zero gradients leave the
/// parameters untouched.
pub fn adam_step<F: Scalar>(
    params: &mut VectorFieldParams<F>,
    grads: &Gradients<F>,
    state: &mut AdamState<F>,
    cfg: &AdamConfig<F>,
) {
    state.step += 1;
    let t = state.step;
    let b1 = cfg.beta1;
    let b2 = cfg.beta2;
    let bias1 = F::one() - b1.powi(t as i32);
    let bias2 = F::one() - b2.powi(t as i32);
    for (l, layer) in params.layers_mut().iter_mut().enumerate() {
        let g = &grads.layers[l];
        let (mw, mb) = &mut state.m[l];
        let (vw, vb) = &mut state.v[l];
        for ((p, gx), (m, v)) in layer
            .w
            .iter_mut()
            .zip(g.w.iter())
            .zip(mw.iter_mut().zip(vw.iter_mut()))
        {
            *m = b1 * *m + (F::one() - b1) * *gx;
            *v = b2 * *v + (F::one() - b2) * *gx * *gx;
            let mhat = *m / bias1;
            let vhat = *v / bias2;
            *p = *p - cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
        }
        for ((p, gx), (m, v)) in layer
            .b
            .iter_mut()
            .zip(g.b.iter())
            .zip(mb.iter_mut().zip(vb.iter_mut()))
        {
            *m = b1 * *m + (F::one() - b1) * *gx;
            *v = b2 * *v + (F::one() - b2) * *gx * *gx;
            let mhat = *m / bias1;
            let vhat = *v / bias2;
            *p = *p - cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net() -> VectorFieldParams<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        VectorFieldParams::init(1, 1, 4, 2, &mut rng).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = net();
        let before = p.clone();
        let g = Gradients::zeros_like(&p);
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &g, &mut st, &AdamConfig::with_lr(1e-3));
        for (a, b) in p.layers().iter().zip(before.layers().iter()) {
            assert_eq!(a.w, b.w);
            assert_eq!(a.b, b.b);
        }
    }

    #[test]
    fn first_step_is_signed_lr_for_large_gradients() {
        let mut p = net();
        let before = p.clone();
        let mut g = Gradients::zeros_like(&p);
        g.layers[0].w[[0, 0]] = 5.0;
        g.layers[0].w[[0, 1]] = -3.0;
        let lr = 1e-2;
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &g, &mut st, &AdamConfig::with_lr(lr));
        // first step: m̂ = g, v̂ = g², update = −lr·g/(|g| + eps) ≈ −lr·sign(g)
        let d00 = p.layers()[0].w[[0, 0]] - before.layers()[0].w[[0, 0]];
        let d01 = p.layers()[0].w[[0, 1]] - before.layers()[0].w[[0, 1]];
        assert!((d00 + lr).abs() < 1e-6 * lr.max(1.0));
        assert!((d01 - lr).abs() < 1e-6 * lr.max(1.0));
        // untouched parameter stays put
        assert_eq!(p.layers()[0].w[[1, 0]], before.layers()[0].w[[1, 0]]);
    }

    #[test]
    fn identical_calls_are_deterministic() {
        let run = || {
            let mut p = net();
            let mut g = Gradients::zeros_like(&p);
            g.layers[0].w[[0, 0]] = 0.3;
            g.layers[1].b[0] = -0.7;
            let mut st = AdamState::new(&p);
            let cfg = AdamConfig::with_lr(3e-4);
            for _ in 0..5 {
                adam_step(&mut p, &g, &mut st, &cfg);
            }
            (p, st.step_count())
        };
        let (p1, s1) = run();
        let (p2, s2) = run();
        assert_eq!(s1, s2);
        for (a, b) in p1.layers().iter().zip(p2.layers().iter()) {
            assert_eq!(a.w, b.w);
            assert_eq!(a.b, b.b);
        }
    }
}
