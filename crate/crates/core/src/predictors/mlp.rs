//! Small fully connected tanh network with hand-written backprop, and Adam.

use serde::{Deserialize, Serialize};

use crate::math::Rng;
use crate::real::Real;

/// Dense network `sizes[0] → … → sizes[L]`, tanh on hidden layers, linear
/// output. Parameters are one flat vector: per layer, the `out × in` weight
/// matrix (row-major) followed by the `out` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp<T> {
    sizes: Vec<usize>,
    params: Vec<T>,
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

impl<T: Real> Mlp<T> {
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        Self { sizes: sizes.to_vec(), params: vec![T::zero(); param_count(sizes)] }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn random(sizes: &[usize], rng: &mut Rng) -> Self {
        let mut m = Self::zeros(sizes);
        let mut off = 0;
        for w in sizes.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let limit = (6.0 / (n_in + n_out) as f64).sqrt();
            for p in &mut m.params[off..off + n_in * n_out] {
                *p = T::lit(rng.uniform(-limit, limit).expect("limit > 0"));
            }
            off += n_in * n_out + n_out;
        }
        m
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("non-empty")
    }

    /// `(weight offset, bias offset)` of every layer.
    pub fn layer_offsets(&self) -> Vec<(usize, usize)> {
        let mut off = 0;
        self.sizes
            .windows(2)
            .map(|w| {
                let r = (off, off + w[0] * w[1]);
                off += w[0] * w[1] + w[1];
                r
            })
            .collect()
    }

    /// Forward pass over a row-major batch; returns every layer's activations
    /// (input first).
    fn activations(&self, xs: &[T], batch: usize) -> Vec<Vec<T>> {
        let layers = self.sizes.len() - 1;
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(xs.to_vec());
        for (l, (wo, bo)) in self.layer_offsets().into_iter().enumerate() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[wo..bo];
            let b = &self.params[bo..bo + n_out];
            let prev = &acts[l];
            // Transposed copy so the inner loop runs over contiguous outputs.
            let mut wt = vec![T::zero(); n_in * n_out];
            for o in 0..n_out {
                for i in 0..n_in {
                    wt[i * n_out + o] = w[o * n_in + i];
                }
            }
            let mut out = vec![T::zero(); batch * n_out];
            for s in 0..batch {
                let x = &prev[s * n_in..(s + 1) * n_in];
                let z = &mut out[s * n_out..(s + 1) * n_out];
                z.copy_from_slice(b);
                for i in 0..n_in {
                    let xi = x[i];
                    let col = &wt[i * n_out..(i + 1) * n_out];
                    for o in 0..n_out {
                        z[o] += xi * col[o];
                    }
                }
                if l + 1 < layers {
                    z.iter_mut().for_each(|v| *v = v.tanh());
                }
            }
            acts.push(out);
        }
        acts
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        self.activations(x, 1).pop().expect("output layer")
    }

    /// Mean squared error over the batch and output dimensions.
    pub fn loss(&self, xs: &[T], ys: &[T]) -> T {
        let batch = xs.len() / self.input_dim();
        let out = self.activations(xs, batch).pop().expect("output layer");
        let n = T::from_usize(out.len()).expect("size fits");
        out.iter().zip(ys).map(|(&p, &y)| (p - y) * (p - y)).sum::<T>() / n
    }

    /// Loss and its gradient with respect to every parameter (written into
    /// `grad`, which must have `params().len()` entries).
    pub fn loss_and_grad(&self, xs: &[T], ys: &[T], grad: &mut [T]) -> T {
        assert_eq!(grad.len(), self.params.len());
        let batch = xs.len() / self.input_dim();
        let layers = self.sizes.len() - 1;
        let acts = self.activations(xs, batch);
        let out = &acts[layers];
        let n = T::from_usize(out.len()).expect("size fits");
        let two_over_n = T::lit(2.0) / n;
        let mut loss = T::zero();
        let mut delta: Vec<T> = out
            .iter()
            .zip(ys)
            .map(|(&p, &y)| {
                let r = p - y;
                loss += r * r;
                two_over_n * r
            })
            .collect();
        grad.iter_mut().for_each(|g| *g = T::zero());
        let offsets = self.layer_offsets();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let (wo, bo) = offsets[l];
            let prev = &acts[l];
            {
                let (gw, gb) = grad[wo..bo + n_out].split_at_mut(bo - wo);
                for s in 0..batch {
                    let x = &prev[s * n_in..(s + 1) * n_in];
                    for o in 0..n_out {
                        let d = delta[s * n_out + o];
                        gb[o] += d;
                        let row = &mut gw[o * n_in..(o + 1) * n_in];
                        for i in 0..n_in {
                            row[i] += d * x[i];
                        }
                    }
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.params[wo..bo];
            let mut back = vec![T::zero(); batch * n_in];
            for s in 0..batch {
                let dst = &mut back[s * n_in..(s + 1) * n_in];
                for o in 0..n_out {
                    let d = delta[s * n_out + o];
                    let row = &w[o * n_in..(o + 1) * n_in];
                    for i in 0..n_in {
                        dst[i] += d * row[i];
                    }
                }
                // tanh' = 1 − a²
                for i in 0..n_in {
                    let a = prev[s * n_in + i];
                    dst[i] *= T::one() - a * a;
                }
            }
            delta = back;
        }
        loss / n
    }
}

/// Per-layer relative error `‖g − g_fd‖ / max(‖g‖, ‖g_fd‖)` between the
/// analytic gradient and central differences with step `h`.
pub fn gradient_check(mlp: &Mlp<f64>, xs: &[f64], ys: &[f64], h: f64) -> Vec<f64> {
    let mut grad = vec![0.0; mlp.params().len()];
    mlp.loss_and_grad(xs, ys, &mut grad);
    let mut probe = mlp.clone();
    let mut errors = Vec::new();
    let offsets = mlp.layer_offsets();
    for (l, &(wo, _)) in offsets.iter().enumerate() {
        let end = offsets.get(l + 1).map_or(mlp.params().len(), |o| o.0);
        let (mut diff, mut na, mut nf) = (0.0, 0.0, 0.0);
        for k in wo..end {
            let orig = probe.params[k];
            probe.params[k] = orig + h;
            let up = probe.loss(xs, ys);
            probe.params[k] = orig - h;
            let down = probe.loss(xs, ys);
            probe.params[k] = orig;
            let fd = (up - down) / (2.0 * h);
            diff += (grad[k] - fd).powi(2);
            na += grad[k] * grad[k];
            nf += fd * fd;
        }
        let scale = na.sqrt().max(nf.sqrt());
        errors.push(if scale == 0.0 { 0.0 } else { diff.sqrt() / scale });
    }
    errors
}

/// Bias-corrected Adam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState<T> {
    pub step: u64,
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
}

impl<T: Real> AdamState<T> {
    pub fn new(n: usize) -> Self {
        Self {
            step: 0,
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            lr: T::lit(1e-3),
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
        }
    }
}

pub fn adam_step<T: Real>(opt: &mut AdamState<T>, params: &mut [T], grads: &[T]) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), opt.m.len());
    opt.step += 1;
    let t = opt.step as i32;
    let c1 = T::one() - opt.beta1.powi(t);
    let c2 = T::one() - opt.beta2.powi(t);
    for k in 0..params.len() {
        let g = grads[k];
        opt.m[k] = opt.beta1 * opt.m[k] + (T::one() - opt.beta1) * g;
        opt.v[k] = opt.beta2 * opt.v[k] + (T::one() - opt.beta2) * g * g;
        let m_hat = opt.m[k] / c1;
        let v_hat = opt.v[k] / c2;
        params[k] -= opt.lr * m_hat / (v_hat.sqrt() + opt.eps);
    }
}
