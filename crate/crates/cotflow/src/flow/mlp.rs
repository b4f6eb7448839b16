//! The triangular velocity model: an MLP taking concat(t, y, u) and emitting
//! a U-block velocity. The Y-velocity is zero by construction, so anything
//! integrated along this field keeps its y coordinate.
//!
//! Forward and reverse passes are hand-rolled over ndarray matmuls; gradients
//! are checked against central finite differences in the test suite.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

// SELU constants (Klambauer et al.).
const SELU_LAMBDA: f64 = 1.0507009873554805;
const SELU_ALPHA: f64 = 1.6732632423543772;

fn selu<F: Scalar>(x: F) -> F {
    let lambda = F::cast(SELU_LAMBDA);
    let alpha = F::cast(SELU_ALPHA);
    if x > F::zero() {
        lambda * x
    } else {
        lambda * alpha * (x.exp() - F::one())
    }
}

fn selu_prime<F: Scalar>(x: F) -> F {
    let lambda = F::cast(SELU_LAMBDA);
    let alpha = F::cast(SELU_ALPHA);
    if x > F::zero() {
        lambda
    } else {
        lambda * alpha * x.exp()
    }
}

#[derive(Debug, Clone)]
pub struct DenseLayer<F> {
    /// (fan_in, fan_out)
    pub w: Array2<F>,
    pub b: Array1<F>,
}

#[derive(Debug, Clone)]
pub struct VectorFieldParams<F> {
    d_y: usize,
    d_u: usize,
    layers: Vec<DenseLayer<F>>,
}

/// Per-layer parameter gradients, shaped like the layers themselves.
#[derive(Debug, Clone)]
pub struct Gradients<F> {
    pub layers: Vec<DenseLayer<F>>,
}

impl<F: Scalar> Gradients<F> {
    pub fn zeros_like(params: &VectorFieldParams<F>) -> Self {
        Self {
            layers: params
                .layers
                .iter()
                .map(|l| DenseLayer { w: Array2::zeros(l.w.dim()), b: Array1::zeros(l.b.len()) })
                .collect(),
        }
    }

    pub fn scale(&mut self, c: F) {
        for l in &mut self.layers {
            l.w.mapv_inplace(|x| x * c);
            l.b.mapv_inplace(|x| x * c);
        }
    }

    pub fn max_abs(&self) -> F {
        let mut m = F::zero();
        for l in &self.layers {
            for x in l.w.iter().chain(l.b.iter()) {
                m = m.max(x.abs());
            }
        }
        m
    }
}

impl<F: Scalar> VectorFieldParams<F> {
    /// Truncated-normal init scaled by 1/√fan_in on hidden layers; the final
    /// layer is zeroed so the initial field vanishes and early trajectories
    /// stay put.
    pub fn init<R: Rng + ?Sized>(
        d_y: usize,
        d_u: usize,
        width: usize,
        depth: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if d_y == 0 || d_u == 0 || width == 0 || depth == 0 {
            return Err(Error::InvalidConfig(
                "network needs d_y, d_u, width, depth all positive".into(),
            ));
        }
        let input = 1 + d_y + d_u;
        let mut dims = Vec::with_capacity(depth + 1);
        dims.push(input);
        for _ in 0..depth.saturating_sub(1) {
            dims.push(width);
        }
        dims.push(d_u);
        let mut layers = Vec::with_capacity(depth);
        for l in 0..depth {
            let fan_in = dims[l];
            let fan_out = dims[l + 1];
            let mut w = Array2::zeros((fan_in, fan_out));
            let b = Array1::zeros(fan_out);
            if l + 1 < depth {
                let sd = F::one() / F::cast_usize(fan_in).sqrt();
                for x in w.iter_mut() {
                    *x = truncated_normal::<F, R>(rng) * sd;
                }
            }
            layers.push(DenseLayer { w, b });
        }
        Ok(Self { d_y, d_u, layers })
    }

    pub fn d_y(&self) -> usize {
        self.d_y
    }

    pub fn d_u(&self) -> usize {
        self.d_u
    }

    pub fn layers(&self) -> &[DenseLayer<F>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer<F>] {
        &mut self.layers
    }

    pub(crate) fn from_layers(d_y: usize, d_u: usize, layers: Vec<DenseLayer<F>>) -> Self {
        Self { d_y, d_u, layers }
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Network output for a batch of inputs laid out as rows [t, y…, u…].
    /// Returns the U-velocity block only.
    pub fn forward_batch(&self, x: &ArrayView2<'_, F>) -> Result<Array2<F>> {
        let (_, out) = self.forward_cached(x)?;
        Ok(out)
    }

    /// Full velocity (d_y + d_u) for a single state; the Y-block is exactly
    /// zero by construction.
    pub fn forward(&self, t: F, y: &ArrayView1<'_, F>, u: &ArrayView1<'_, F>) -> Result<Array1<F>> {
        if y.len() != self.d_y || u.len() != self.d_u {
            return Err(Error::DimensionMismatch(format!(
                "expected (d_y, d_u) = ({}, {}), got ({}, {})",
                self.d_y,
                self.d_u,
                y.len(),
                u.len()
            )));
        }
        let mut x = Array2::zeros((1, 1 + self.d_y + self.d_u));
        x[[0, 0]] = t;
        for (k, v) in y.iter().enumerate() {
            x[[0, 1 + k]] = *v;
        }
        for (k, v) in u.iter().enumerate() {
            x[[0, 1 + self.d_y + k]] = *v;
        }
        let out = self.forward_batch(&x.view())?;
        let mut full = Array1::zeros(self.d_y + self.d_u);
        for k in 0..self.d_u {
            full[self.d_y + k] = out[[0, k]];
        }
        Ok(full)
    }

    /// Forward pass keeping pre-activations for the backward sweep.
    /// `pre[l]` is the affine output of layer `l`; activations are SELU on
    /// all but the last layer.
    fn forward_cached(&self, x: &ArrayView2<'_, F>) -> Result<(Vec<Array2<F>>, Array2<F>)> {
        if x.ncols() != 1 + self.d_y + self.d_u {
            return Err(Error::DimensionMismatch(format!(
                "input has {} columns, expected {}",
                x.ncols(),
                1 + self.d_y + self.d_u
            )));
        }
        let depth = self.layers.len();
        let mut pre: Vec<Array2<F>> = Vec::with_capacity(depth);
        let mut act = x.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = act.dot(&layer.w);
            for mut row in z.rows_mut() {
                row += &layer.b;
            }
            if z.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("forward pass at layer {l}")));
            }
            if l + 1 < depth {
                act = z.mapv(selu);
            } else {
                act = z.clone();
            }
            pre.push(z);
        }
        Ok((pre, act))
    }

    /// Loss and gradient of the flow-matching objective on a batch:
    /// mean over rows of ‖net(x) − target‖² on the U-block.
    ///
    /// `x` rows are [t, y…, u…]; `target_u` rows are the U-block of the
    /// per-sample velocity targets.
    pub fn loss_and_grad(
        &self,
        x: &ArrayView2<'_, F>,
        target_u: &ArrayView2<'_, F>,
    ) -> Result<(F, Gradients<F>)> {
        let batch = x.nrows();
        if batch == 0 {
            return Err(Error::InvalidConfig("empty batch".into()));
        }
        if target_u.nrows() != batch || target_u.ncols() != self.d_u {
            return Err(Error::DimensionMismatch("targets do not match batch".into()));
        }
        let (pre, out) = self.forward_cached(x)?;
        let resid = &out - target_u;
        let inv_b = F::one() / F::cast_usize(batch);
        let loss = resid.iter().map(|r| *r * *r).sum::<F>() * inv_b;

        let depth = self.layers.len();
        let mut grads = Gradients::zeros_like(self);
        // d loss / d out
        let mut delta = resid.mapv(|r| F::cast(2.0) * r * inv_b);
        for l in (0..depth).rev() {
            let a_prev: Array2<F> = if l == 0 {
                x.to_owned()
            } else {
                pre[l - 1].mapv(selu)
            };
            grads.layers[l].w = a_prev.t().dot(&delta);
            grads.layers[l].b = delta.sum_axis(Axis(0));
            if grads.layers[l].w.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("backward pass at layer {l}")));
            }
            if l > 0 {
                let back = delta.dot(&self.layers[l].w.t());
                delta = &back * &pre[l - 1].mapv(selu_prime);
            }
        }
        Ok((loss, grads))
    }

    /// Loss only (same objective as [`Self::loss_and_grad`]).
    pub fn loss(&self, x: &ArrayView2<'_, F>, target_u: &ArrayView2<'_, F>) -> Result<F> {
        let batch = x.nrows();
        if batch == 0 {
            return Err(Error::InvalidConfig("empty batch".into()));
        }
        if target_u.nrows() != batch || target_u.ncols() != self.d_u {
            return Err(Error::DimensionMismatch("targets do not match batch".into()));
        }
        let (_, out) = self.forward_cached(x)?;
        let inv_b = F::one() / F::cast_usize(batch);
        Ok(out
            .iter()
            .zip(target_u.iter())
            .map(|(o, t)| {
                let r = *o - *t;
                r * r
            })
            .sum::<F>()
            * inv_b)
    }
}

fn truncated_normal<F: Scalar, R: Rng + ?Sized>(rng: &mut R) -> F {
    // Resample outside two standard deviations.
    loop {
        let z = F::standard_normal(rng);
        if z.abs() <= F::cast(2.0) {
            return z;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_net(seed: u64) -> VectorFieldParams<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = VectorFieldParams::init(1, 1, 8, 2, &mut rng).unwrap();
        // Give the output layer nonzero weights so gradients flow everywhere.
        let mut r2 = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        for x in p.layers_mut()[1].w.iter_mut() {
            *x = r2.random_range(-0.5..0.5);
        }
        p
    }

    #[test]
    fn y_block_is_exactly_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = VectorFieldParams::<f64>::init(2, 3, 16, 3, &mut rng).unwrap();
        let v = p
            .forward(0.3, &array![0.5, -1.0].view(), &array![1.0, 2.0, 3.0].view())
            .unwrap();
        assert_eq!(v[0], 0.0);
        assert_eq!(v[1], 0.0);
    }

    #[test]
    fn zero_final_layer_outputs_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut p = VectorFieldParams::<f64>::init(1, 2, 8, 2, &mut rng).unwrap();
        p.layers_mut()[1].b = array![0.7, -0.2];
        let v = p.forward(0.9, &array![0.1].view(), &array![0.0, 0.0].view()).unwrap();
        assert_eq!(v[1], 0.7);
        assert_eq!(v[2], -0.2);
    }

    #[test]
    fn forward_is_deterministic() {
        let p = small_net(11);
        let a = p.forward(0.5, &array![1.0].view(), &array![-1.0].view()).unwrap();
        let b = p.forward(0.5, &array![1.0].view(), &array![-1.0].view()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn loss_zero_when_output_matches_target() {
        let p = small_net(5);
        let x = array![[0.2, 1.0, -0.5]];
        let out = p.forward_batch(&x.view()).unwrap();
        let (loss, grads) = p.loss_and_grad(&x.view(), &out.view()).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(grads.max_abs(), 0.0);
    }

    #[test]
    fn zero_model_loss_is_target_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = VectorFieldParams::<f64>::init(1, 2, 8, 2, &mut rng).unwrap();
        // zero final layer => output 0
        let x = array![[0.0, 0.0, 0.0, 0.0]];
        let tgt = array![[3.0, 4.0]];
        let loss = p.loss(&x.view(), &tgt.view()).unwrap();
        assert_abs_diff_eq!(loss, 25.0, epsilon = 1e-12);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let p = small_net(7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let batch = 4;
        let mut x = Array2::zeros((batch, 3));
        let mut tgt = Array2::zeros((batch, 1));
        for i in 0..batch {
            x[[i, 0]] = rng.random_range(0.0..1.0);
            x[[i, 1]] = rng.random_range(-1.0..1.0);
            x[[i, 2]] = rng.random_range(-1.0..1.0);
            tgt[[i, 0]] = rng.random_range(-1.0..1.0);
        }
        let (_, grads) = p.loss_and_grad(&x.view(), &tgt.view()).unwrap();
        let h = 1e-4;
        let mut max_rel = 0.0f64;
        for l in 0..p.layers().len() {
            for idx in 0..p.layers()[l].w.len() {
                let mut plus = p.clone();
                let mut minus = p.clone();
                {
                    let w = plus.layers_mut()[l].w.as_slice_mut().unwrap();
                    w[idx] += h;
                }
                {
                    let w = minus.layers_mut()[l].w.as_slice_mut().unwrap();
                    w[idx] -= h;
                }
                let fd = (plus.loss(&x.view(), &tgt.view()).unwrap()
                    - minus.loss(&x.view(), &tgt.view()).unwrap())
                    / (2.0 * h);
                let an = grads.layers[l].w.as_slice().unwrap()[idx];
                let denom = an.abs().max(fd.abs()).max(1e-6);
                max_rel = max_rel.max((fd - an).abs() / denom);
            }
        }
        assert!(max_rel <= 1e-4, "max relative FD error {max_rel}");
    }

    #[test]
    fn gradient_is_linear_in_loss_scale() {
        // grad of mean-over-batch equals mean of per-sample grads.
        let p = small_net(9);
        let x = array![[0.1, 0.4, -0.2], [0.9, -1.0, 0.3]];
        let tgt = array![[0.5], [-0.25]];
        let (_, g_batch) = p.loss_and_grad(&x.view(), &tgt.view()).unwrap();
        let (_, g0) = p
            .loss_and_grad(&x.slice(ndarray::s![0..1, ..]), &tgt.slice(ndarray::s![0..1, ..]))
            .unwrap();
        let (_, g1) = p
            .loss_and_grad(&x.slice(ndarray::s![1..2, ..]), &tgt.slice(ndarray::s![1..2, ..]))
            .unwrap();
        for l in 0..g_batch.layers.len() {
            for (gb, (a, b)) in g_batch.layers[l]
                .w
                .iter()
                .zip(g0.layers[l].w.iter().zip(g1.layers[l].w.iter()))
            {
                assert_abs_diff_eq!(*gb, 0.5 * (a + b), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn empty_batch_rejected() {
        let p = small_net(10);
        let x = Array2::<f64>::zeros((0, 3));
        let t = Array2::<f64>::zeros((0, 1));
        assert!(p.loss(&x.view(), &t.view()).is_err());
    }
}
