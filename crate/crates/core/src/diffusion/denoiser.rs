//! The trainable noise-prediction network.
//!
//! A small MLP over `[noised embedding | sinusoidal time features | learned
//! class embedding]`. Inference is deterministic given parameters and
//! inputs; all randomness lives in initialization and in the callers.

use crate::nn::{Activation, Mlp, MlpGrads};
use rand::Rng;

/// Sinusoidal features of the normalized step `t / T`, frequencies pi * 2^j.
pub fn time_features(t: usize, total_steps: usize, feat_dim: usize) -> Vec<f64> {
    assert!(feat_dim % 2 == 0, "time feature dimension must be even");
    let tau = t as f64 / total_steps as f64;
    let mut out = Vec::with_capacity(feat_dim);
    for j in 0..feat_dim / 2 {
        let angle = tau * std::f64::consts::PI * (1 << j) as f64;
        out.push(angle.sin());
        out.push(angle.cos());
    }
    out
}

#[derive(Debug, Clone)]
pub struct Denoiser {
    pub dim: usize,
    pub class_count: usize,
    pub class_embed_dim: usize,
    pub time_feat_dim: usize,
    /// Learned class table, row-major `class_count x class_embed_dim`.
    pub class_embed: Vec<f64>,
    pub mlp: Mlp,
}

/// Cache for one batch row, consumed by `backward_batch`.
pub struct DenoiserCache {
    mlp_cache: crate::nn::MlpCache,
    class: usize,
}

impl Denoiser {
    pub fn init(
        dim: usize,
        class_count: usize,
        class_embed_dim: usize,
        time_feat_dim: usize,
        hidden: &[usize],
        activation: Activation,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(time_feat_dim % 2 == 0, "time feature dimension must be even");
        let mut sizes = vec![dim + time_feat_dim + class_embed_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(dim);
        let mlp = Mlp::init(&sizes, activation, rng);
        let scale = 1.0 / (class_embed_dim as f64).sqrt();
        let class_embed = (0..class_count * class_embed_dim)
            .map(|_| rng.gen_range(-scale..scale))
            .collect();
        Denoiser {
            dim,
            class_count,
            class_embed_dim,
            time_feat_dim,
            class_embed,
            mlp,
        }
    }

    pub fn param_count(&self) -> usize {
        self.class_embed.len() + self.mlp.param_count()
    }

    fn assemble_input(&self, zt: &[f64], t: usize, class: usize, total_steps: usize) -> Vec<f64> {
        debug_assert_eq!(zt.len(), self.dim);
        debug_assert!(class < self.class_count);
        let mut input = Vec::with_capacity(self.mlp.input_dim());
        input.extend_from_slice(zt);
        input.extend(time_features(t, total_steps, self.time_feat_dim));
        let row = &self.class_embed[class * self.class_embed_dim..(class + 1) * self.class_embed_dim];
        input.extend_from_slice(row);
        input
    }

    pub fn predict_noise(&self, zt: &[f64], t: usize, class: usize, total_steps: usize) -> Vec<f64> {
        self.mlp.forward(&self.assemble_input(zt, t, class, total_steps))
    }

    pub fn predict_noise_cached(
        &self,
        zt: &[f64],
        t: usize,
        class: usize,
        total_steps: usize,
    ) -> (Vec<f64>, DenoiserCache) {
        let (out, mlp_cache) = self
            .mlp
            .forward_cached(&self.assemble_input(zt, t, class, total_steps));
        (out, DenoiserCache { mlp_cache, class })
    }

    /// Accumulates dL/d(theta) for a set of cached rows given dL/d(eps_pred)
    /// per row. Returns gradients in flat-parameter order.
    pub fn backward_batch(&self, caches: &[DenoiserCache], dl_dout: &[Vec<f64>]) -> Vec<f64> {
        assert_eq!(caches.len(), dl_dout.len());
        let mut class_grads = vec![0.0; self.class_embed.len()];
        let mut mlp_grads: MlpGrads = self.mlp.zero_grads();
        for (cache, dl) in caches.iter().zip(dl_dout) {
            let dl_dinput = self.mlp.backward(&cache.mlp_cache, dl, &mut mlp_grads);
            let class_part = &dl_dinput[self.dim + self.time_feat_dim..];
            let row = &mut class_grads
                [cache.class * self.class_embed_dim..(cache.class + 1) * self.class_embed_dim];
            for (g, d) in row.iter_mut().zip(class_part) {
                *g += d;
            }
        }
        let mut flat = Vec::with_capacity(self.param_count());
        flat.extend_from_slice(&class_grads);
        mlp_grads.push_flat(&mut flat);
        flat
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        out.extend_from_slice(&self.class_embed);
        self.mlp.push_params(&mut out);
        out
    }

    pub fn set_params_flat(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count());
        let n_class = self.class_embed.len();
        self.class_embed.copy_from_slice(&params[..n_class]);
        let mut it = params[n_class..].iter();
        self.mlp.pull_params(&mut it);
    }

    /// Layer widths, input first.
    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.mlp.sizes[1..self.mlp.sizes.len() - 1].to_vec()
    }
}
