//! Small dense networks with hand-written backpropagation.
//!
//! Hidden layers apply the configured activation; the output layer is
//! linear. Gradients are plain accumulated tensors so optimizers and
//! finite-difference checks can treat parameters as one flat vector.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::{c, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    fn apply<T: Real>(self, x: T) -> T {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(T::zero()),
        }
    }

    /// Derivative expressed through the activated output.
    #[inline]
    fn derivative_from_output<T: Real>(self, y: T) -> T {
        match self {
            Activation::Tanh => T::one() - y * y,
            Activation::Relu => {
                if y > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }
}

/// One dense layer, weights row-major `[out_dim x in_dim]`.
#[derive(Clone, Debug)]
pub struct Dense<T: Real> {
    pub w: Vec<T>,
    pub b: Vec<T>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl<T: Real> Dense<T> {
    fn forward_into(&self, x: &[T], out: &mut Vec<T>) {
        out.clear();
        for r in 0..self.out_dim {
            let row = &self.w[r * self.in_dim..(r + 1) * self.in_dim];
            let mut s = self.b[r];
            for (wi, xi) in row.iter().zip(x) {
                s += *wi * *xi;
            }
            out.push(s);
        }
    }
}

/// Multilayer perceptron.
#[derive(Clone, Debug)]
pub struct Mlp<T: Real> {
    pub sizes: Vec<usize>,
    pub activation: Activation,
    pub layers: Vec<Dense<T>>,
}

/// Per-layer activation record for backpropagation. `post[0]` is the input,
/// `post[i+1]` the output of layer `i` after its nonlinearity (the final
/// layer is linear).
pub struct ForwardTrace<T: Real> {
    pub post: Vec<Vec<T>>,
}

impl<T: Real> ForwardTrace<T> {
    pub fn output(&self) -> &[T] {
        self.post.last().expect("trace has layers")
    }
}

/// Parameter-shaped gradient accumulator.
#[derive(Clone, Debug)]
pub struct MlpGrads<T: Real> {
    pub layers: Vec<(Vec<T>, Vec<T>)>,
}

impl<T: Real> MlpGrads<T> {
    pub fn zeros_like(mlp: &Mlp<T>) -> Self {
        Self {
            layers: mlp
                .layers
                .iter()
                .map(|l| (vec![T::zero(); l.w.len()], vec![T::zero(); l.b.len()]))
                .collect(),
        }
    }

    pub fn reset(&mut self) {
        for (w, b) in &mut self.layers {
            w.iter_mut().for_each(|v| *v = T::zero());
            b.iter_mut().for_each(|v| *v = T::zero());
        }
    }

    pub fn scale(&mut self, s: T) {
        for (w, b) in &mut self.layers {
            w.iter_mut().for_each(|v| *v *= s);
            b.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn add(&mut self, other: &MlpGrads<T>) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            for (a, o) in w.iter_mut().zip(ow) {
                *a += *o;
            }
            for (a, o) in b.iter_mut().zip(ob) {
                *a += *o;
            }
        }
    }

    pub fn to_flat(&self) -> Vec<T> {
        let mut out = Vec::new();
        for (w, b) in &self.layers {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }
}

impl<T: Real> Mlp<T> {
    /// Random initialization scaled for the activation (Xavier for tanh,
    /// He for relu).
    pub fn new(sizes: &[usize], activation: Activation, rng: &mut ChaCha8Rng) -> Self {
        assert!(sizes.len() >= 2, "need input and output dims");
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for k in 0..sizes.len() - 1 {
            let (nin, nout) = (sizes[k], sizes[k + 1]);
            let gain = match activation {
                Activation::Tanh => (1.0 / nin as f64).sqrt(),
                Activation::Relu => (2.0 / nin as f64).sqrt(),
            };
            let w = (0..nin * nout)
                .map(|_| c::<T>(rng.gen_range(-1.0..1.0) * gain))
                .collect();
            layers.push(Dense {
                w,
                b: vec![T::zero(); nout],
                in_dim: nin,
                out_dim: nout,
            });
        }
        Self {
            sizes: sizes.to_vec(),
            activation,
            layers,
        }
    }

    pub fn zeros(sizes: &[usize], activation: Activation) -> Self {
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for k in 0..sizes.len() - 1 {
            layers.push(Dense {
                w: vec![T::zero(); sizes[k] * sizes[k + 1]],
                b: vec![T::zero(); sizes[k + 1]],
                in_dim: sizes[k],
                out_dim: sizes[k + 1],
            });
        }
        Self {
            sizes: sizes.to_vec(),
            activation,
            layers,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("non-empty")
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.input_dim());
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward_into(&cur, &mut next);
            if i != last {
                for v in next.iter_mut() {
                    *v = self.activation.apply(*v);
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    pub fn forward_trace(&self, x: &[T]) -> ForwardTrace<T> {
        assert_eq!(x.len(), self.input_dim());
        let mut post = Vec::with_capacity(self.layers.len() + 1);
        post.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::new();
            layer.forward_into(post.last().expect("pushed"), &mut out);
            if i != last {
                for v in out.iter_mut() {
                    *v = self.activation.apply(*v);
                }
            }
            post.push(out);
        }
        ForwardTrace { post }
    }

    /// Backpropagates `grad_out` (dL/d output) through the trace,
    /// accumulating parameter gradients and returning dL/d input.
    pub fn backward(
        &self,
        trace: &ForwardTrace<T>,
        grad_out: &[T],
        grads: &mut MlpGrads<T>,
    ) -> Vec<T> {
        let last = self.layers.len() - 1;
        let mut delta = grad_out.to_vec();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            if i != last {
                // Convert gradient at post-activation to pre-activation.
                for (d, y) in delta.iter_mut().zip(&trace.post[i + 1]) {
                    *d *= self.activation.derivative_from_output(*y);
                }
            }
            let input = &trace.post[i];
            let (gw, gb) = &mut grads.layers[i];
            for r in 0..layer.out_dim {
                let d = delta[r];
                gb[r] += d;
                let row = &mut gw[r * layer.in_dim..(r + 1) * layer.in_dim];
                for (g, xi) in row.iter_mut().zip(input) {
                    *g += d * *xi;
                }
            }
            if i > 0 {
                let mut prev = vec![T::zero(); layer.in_dim];
                for r in 0..layer.out_dim {
                    let d = delta[r];
                    let row = &layer.w[r * layer.in_dim..(r + 1) * layer.in_dim];
                    for (p, wi) in prev.iter_mut().zip(row) {
                        *p += d * *wi;
                    }
                }
                delta = prev;
            } else {
                let mut dx = vec![T::zero(); layer.in_dim];
                for r in 0..layer.out_dim {
                    let d = delta[r];
                    let row = &layer.w[r * layer.in_dim..(r + 1) * layer.in_dim];
                    for (p, wi) in dx.iter_mut().zip(row) {
                        *p += d * *wi;
                    }
                }
                return dx;
            }
        }
        unreachable!("loop returns at layer 0")
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
        }
        out
    }

    pub fn from_flat(&mut self, flat: &[T]) {
        assert_eq!(flat.len(), self.num_params());
        let mut k = 0;
        for l in &mut self.layers {
            let nw = l.w.len();
            l.w.copy_from_slice(&flat[k..k + nw]);
            k += nw;
            let nb = l.b.len();
            l.b.copy_from_slice(&flat[k..k + nb]);
            k += nb;
        }
    }

    /// Applies one in-place update `p += step` from a flat step vector.
    pub fn apply_flat_step(&mut self, step: &[T]) {
        assert_eq!(step.len(), self.num_params());
        let mut k = 0;
        for l in &mut self.layers {
            for w in l.w.iter_mut() {
                *w += step[k];
                k += 1;
            }
            for b in l.b.iter_mut() {
                *b += step[k];
                k += 1;
            }
        }
    }
}

/// Adam over a flat parameter vector.
#[derive(Clone, Debug)]
pub struct Adam<T: Real> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    t: usize,
    m: Vec<T>,
    v: Vec<T>,
}

impl<T: Real> Adam<T> {
    pub fn new(lr: T, num_params: usize) -> Self {
        Self {
            lr,
            beta1: c(0.9),
            beta2: c(0.999),
            eps: c(1e-8),
            t: 0,
            m: vec![T::zero(); num_params],
            v: vec![T::zero(); num_params],
        }
    }

    /// Returns the parameter step for the given gradient (descent direction).
    pub fn step(&mut self, grad: &[T]) -> Vec<T> {
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let b1t = T::one() - self.beta1.powi(self.t as i32);
        let b2t = T::one() - self.beta2.powi(self.t as i32);
        let mut out = Vec::with_capacity(grad.len());
        for ((m, v), &g) in self.m.iter_mut().zip(self.v.iter_mut()).zip(grad) {
            *m = self.beta1 * *m + (T::one() - self.beta1) * g;
            *v = self.beta2 * *v + (T::one() - self.beta2) * g * g;
            let mh = *m / b1t;
            let vh = *v / b2t;
            out.push(-self.lr * mh / (vh.sqrt() + self.eps));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn zero_net_outputs_bias() {
        let mut mlp: Mlp<f64> = Mlp::zeros(&[3, 4, 2], Activation::Tanh);
        mlp.layers[1].b = vec![0.5, -1.5];
        let y = mlp.forward(&[1.0, 2.0, 3.0]);
        assert_eq!(y, vec![0.5, -1.5]);
    }

    #[test]
    fn single_linear_layer_matches_matrix_oracle() {
        let mut mlp: Mlp<f64> = Mlp::zeros(&[2, 2], Activation::Tanh);
        mlp.layers[0].w = vec![1.0, 2.0, 3.0, 4.0];
        mlp.layers[0].b = vec![0.1, -0.1];
        let y = mlp.forward(&[5.0, 7.0]);
        assert!((y[0] - (1.0 * 5.0 + 2.0 * 7.0 + 0.1)).abs() < 1e-15);
        assert!((y[1] - (3.0 * 5.0 + 4.0 * 7.0 - 0.1)).abs() < 1e-15);
    }

    fn grad_check(activation: Activation, seed: u64) {
        let mut r = rng(seed);
        let mlp: Mlp<f64> = Mlp::new(&[4, 6, 5, 3], activation, &mut r);
        let x: Vec<f64> = (0..4).map(|_| r.gen_range(-1.0..1.0)).collect();
        let target: Vec<f64> = (0..3).map(|_| r.gen_range(-1.0..1.0)).collect();
        let loss = |m: &Mlp<f64>| -> f64 {
            let y = m.forward(&x);
            y.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum()
        };
        let trace = mlp.forward_trace(&x);
        let grad_out: Vec<f64> = trace
            .output()
            .iter()
            .zip(&target)
            .map(|(a, b)| 2.0 * (a - b))
            .collect();
        let mut grads = MlpGrads::zeros_like(&mlp);
        mlp.backward(&trace, &grad_out, &mut grads);
        let flat_grad = grads.to_flat();
        let h = 1e-6;
        let base_flat = mlp.to_flat();
        for k in (0..base_flat.len()).step_by(7) {
            let mut m2 = mlp.clone();
            let mut fp = base_flat.clone();
            fp[k] += h;
            m2.from_flat(&fp);
            let lp = loss(&m2);
            fp[k] -= 2.0 * h;
            m2.from_flat(&fp);
            let lm = loss(&m2);
            let fd = (lp - lm) / (2.0 * h);
            let scale = fd.abs().max(flat_grad[k].abs()).max(1e-3);
            assert!(
                (fd - flat_grad[k]).abs() / scale < 1e-4,
                "param {k}: analytic {} vs fd {fd}",
                flat_grad[k]
            );
        }
    }

    #[test]
    fn gradients_match_finite_differences_tanh() {
        grad_check(Activation::Tanh, 3);
    }

    #[test]
    fn gradients_match_finite_differences_relu() {
        grad_check(Activation::Relu, 4);
    }

    #[test]
    fn backward_input_gradient_checks() {
        let mut r = rng(11);
        let mlp: Mlp<f64> = Mlp::new(&[3, 5, 2], Activation::Tanh, &mut r);
        let x: Vec<f64> = vec![0.3, -0.7, 0.2];
        let trace = mlp.forward_trace(&x);
        let grad_out = vec![1.0, -2.0];
        let mut grads = MlpGrads::zeros_like(&mlp);
        let dx = mlp.backward(&trace, &grad_out, &mut grads);
        let h = 1e-6;
        for k in 0..3 {
            let mut xp = x.clone();
            xp[k] += h;
            let yp = mlp.forward(&xp);
            xp[k] -= 2.0 * h;
            let ym = mlp.forward(&xp);
            let fd = ((yp[0] - ym[0]) * 1.0 + (yp[1] - ym[1]) * -2.0) / (2.0 * h);
            assert!((fd - dx[k]).abs() < 1e-6, "{fd} vs {}", dx[k]);
        }
    }

    #[test]
    fn adam_minimizes_quadratic() {
        let target = [3.0, -2.0, 0.5];
        let mut params = vec![0.0f64; 3];
        let mut opt = Adam::new(0.05, 3);
        for _ in 0..500 {
            let grad: Vec<f64> = params.iter().zip(&target).map(|(p, t)| 2.0 * (p - t)).collect();
            let step = opt.step(&grad);
            for (p, s) in params.iter_mut().zip(step) {
                *p += s;
            }
        }
        for (p, t) in params.iter().zip(&target) {
            assert!((p - t).abs() < 1e-3, "{p} vs {t}");
        }
    }

    #[test]
    fn seeded_init_is_reproducible() {
        let a: Mlp<f64> = Mlp::new(&[4, 8, 2], Activation::Tanh, &mut rng(42));
        let b: Mlp<f64> = Mlp::new(&[4, 8, 2], Activation::Tanh, &mut rng(42));
        assert_eq!(a.to_flat(), b.to_flat());
    }
}
