//! Tiny feedforward networks with hand-written backpropagation.
//!
//! The models here are deliberately small (a few thousand parameters at
//! most), so weights live in plain `Vec<f64>` and every gradient is written
//! out explicitly. Parameters flatten to a single vector in a fixed order,
//! which is what the optimizers and the finite-difference checks consume.

pub mod conv;

use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(&self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the pre-activation value.
    fn derivative(&self, pre: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = pre.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Fully connected network. The last layer is always linear.
#[derive(Debug, Clone)]
pub struct Mlp {
    /// Layer widths, input first: `[in, h1, ..., out]`.
    pub sizes: Vec<usize>,
    /// Row-major `out x in` weight matrices, one per layer.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub activation: Activation,
}

/// Values cached by `forward_cached`, consumed once by `backward`.
pub struct MlpCache {
    /// Input to each layer (post-activation of the previous one).
    inputs: Vec<Vec<f64>>,
    /// Pre-activation output of each layer.
    preacts: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Mlp {
    /// Xavier-uniform initialization from the given RNG.
    pub fn init(sizes: &[usize], activation: Activation, rng: &mut impl Rng) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(
                (0..fan_in * fan_out)
                    .map(|_| rng.gen_range(-bound..bound))
                    .collect(),
            );
            biases.push(vec![0.0; fan_out]);
        }
        Mlp {
            sizes: sizes.to_vec(),
            weights,
            biases,
            activation,
        }
    }

    pub fn layer_count(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>() + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    fn affine(&self, layer: usize, x: &[f64]) -> Vec<f64> {
        let (n_in, n_out) = (self.sizes[layer], self.sizes[layer + 1]);
        let w = &self.weights[layer];
        let b = &self.biases[layer];
        let mut out = b.clone();
        for o in 0..n_out {
            let row = &w[o * n_in..(o + 1) * n_in];
            let mut acc = 0.0;
            for (wi, xi) in row.iter().zip(x) {
                acc += wi * xi;
            }
            out[o] += acc;
        }
        out
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut h = x.to_vec();
        for layer in 0..self.layer_count() {
            let pre = self.affine(layer, &h);
            h = if layer + 1 == self.layer_count() {
                pre
            } else {
                pre.iter().map(|&v| self.activation.apply(v)).collect()
            };
        }
        h
    }

    pub fn forward_cached(&self, x: &[f64]) -> (Vec<f64>, MlpCache) {
        let mut inputs = Vec::with_capacity(self.layer_count());
        let mut preacts = Vec::with_capacity(self.layer_count());
        let mut h = x.to_vec();
        for layer in 0..self.layer_count() {
            inputs.push(h.clone());
            let pre = self.affine(layer, &h);
            h = if layer + 1 == self.layer_count() {
                pre.clone()
            } else {
                pre.iter().map(|&v| self.activation.apply(v)).collect()
            };
            preacts.push(pre);
        }
        (h, MlpCache { inputs, preacts })
    }

    /// Backpropagates `dl_dout` through the cached forward pass, accumulating
    /// parameter gradients into `grads` and returning dL/d(input).
    pub fn backward(&self, cache: &MlpCache, dl_dout: &[f64], grads: &mut MlpGrads) -> Vec<f64> {
        let mut delta = dl_dout.to_vec();
        for layer in (0..self.layer_count()).rev() {
            let (n_in, n_out) = (self.sizes[layer], self.sizes[layer + 1]);
            // Last layer is linear; hidden layers carry the activation derivative.
            if layer + 1 != self.layer_count() {
                for (d, &pre) in delta.iter_mut().zip(&cache.preacts[layer]) {
                    *d *= self.activation.derivative(pre);
                }
            }
            let x = &cache.inputs[layer];
            let gw = &mut grads.weights[layer];
            for o in 0..n_out {
                let d = delta[o];
                grads.biases[layer][o] += d;
                let row = &mut gw[o * n_in..(o + 1) * n_in];
                for (g, xi) in row.iter_mut().zip(x) {
                    *g += d * xi;
                }
            }
            let w = &self.weights[layer];
            let mut next = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                let row = &w[o * n_in..(o + 1) * n_in];
                for (ni, wi) in next.iter_mut().zip(row) {
                    *ni += d * wi;
                }
            }
            delta = next;
        }
        delta
    }

    pub fn zero_grads(&self) -> MlpGrads {
        MlpGrads {
            weights: self.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn push_params(&self, out: &mut Vec<f64>) {
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
    }

    pub fn pull_params<'a>(&mut self, it: &mut impl Iterator<Item = &'a f64>) {
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            for v in w.iter_mut().chain(b.iter_mut()) {
                *v = *it.next().expect("parameter vector too short");
            }
        }
    }
}

impl MlpGrads {
    pub fn push_flat(&self, out: &mut Vec<f64>) {
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Cross-entropy of one sample; returns (loss, dL/dlogits).
pub fn cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let probs = softmax(logits);
    let loss = -probs[label].max(1e-300).ln();
    let mut grad = probs;
    grad[label] -= 1.0;
    (loss, grad)
}

/// Adam with decoupled weight decay over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamW {
    pub fn new(lr: f64, weight_decay: f64, dim: usize) -> Self {
        AdamW {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), grads.len());
        assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * (m_hat / (v_hat.sqrt() + self.eps) + self.weight_decay * params[i]);
        }
    }
}

/// Plain SGD with momentum, used by the evaluation classifiers.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub lr: f64,
    pub momentum: f64,
    velocity: Vec<f64>,
}

impl Sgd {
    pub fn new(lr: f64, momentum: f64, dim: usize) -> Self {
        Sgd {
            lr,
            momentum,
            velocity: vec![0.0; dim],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), grads.len());
        for i in 0..params.len() {
            self.velocity[i] = self.momentum * self.velocity[i] + grads[i];
            params[i] -= self.lr * self.velocity[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn finite_diff_grad(mlp: &Mlp, x: &[f64], target: &[f64]) -> Vec<f64> {
        // Loss: 0.5 * ||f(x) - target||^2
        let mut params = Vec::new();
        mlp.push_params(&mut params);
        let h = 1e-6;
        let mut fd = Vec::with_capacity(params.len());
        for i in 0..params.len() {
            let eval = |delta: f64| {
                let mut p = params.clone();
                p[i] += delta;
                let mut m = mlp.clone();
                m.pull_params(&mut p.iter());
                let y = m.forward(x);
                0.5 * y.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            };
            fd.push((eval(h) - eval(-h)) / (2.0 * h));
        }
        fd
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = rng_from_seed(11);
        let mlp = Mlp::init(&[3, 5, 2], Activation::Tanh, &mut rng);
        let x = vec![0.3, -0.7, 1.1];
        let target = vec![0.2, -0.4];

        let (y, cache) = mlp.forward_cached(&x);
        let dl_dout: Vec<f64> = y.iter().zip(&target).map(|(a, b)| a - b).collect();
        let mut grads = mlp.zero_grads();
        mlp.backward(&cache, &dl_dout, &mut grads);
        let mut analytic = Vec::new();
        grads.push_flat(&mut analytic);

        let fd = finite_diff_grad(&mlp, &x, &target);
        for (a, f) in analytic.iter().zip(&fd) {
            assert!((a - f).abs() < 1e-7, "grad mismatch: {a} vs {f}");
        }
    }

    #[test]
    fn backward_input_gradient() {
        let mut rng = rng_from_seed(3);
        let mlp = Mlp::init(&[2, 4, 1], Activation::Tanh, &mut rng);
        let x = vec![0.5, -0.2];
        let (y, cache) = mlp.forward_cached(&x);
        let mut grads = mlp.zero_grads();
        let dx = mlp.backward(&cache, &[1.0], &mut grads);

        let h = 1e-6;
        for i in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (mlp.forward(&xp)[0] - mlp.forward(&xm)[0]) / (2.0 * h);
            assert!((dx[i] - fd).abs() < 1e-7);
        }
        let _ = y;
    }

    #[test]
    fn cross_entropy_gradient() {
        let logits = vec![0.2, -1.0, 0.5];
        let (_, g) = cross_entropy(&logits, 2);
        let h = 1e-6;
        for i in 0..logits.len() {
            let mut lp = logits.clone();
            let mut lm = logits.clone();
            lp[i] += h;
            lm[i] -= h;
            let fd = (cross_entropy(&lp, 2).0 - cross_entropy(&lm, 2).0) / (2.0 * h);
            assert!((g[i] - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn adamw_reduces_quadratic() {
        let mut p = vec![5.0, -3.0];
        let mut opt = AdamW::new(0.1, 0.0, 2);
        for _ in 0..500 {
            let g: Vec<f64> = p.iter().map(|&x| 2.0 * x).collect();
            opt.step(&mut p, &g);
        }
        assert!(p.iter().all(|x| x.abs() < 1e-2), "{p:?}");
    }
}
