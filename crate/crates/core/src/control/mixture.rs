//! Identity-covariance Gaussian mixtures and their transport drift.
//!
//! With the target written relative to the standard Gaussian, the heat
//! semigroup applied to the density ratio has a closed form for these
//! mixtures, and the optimal drift is a softmax-weighted combination of the
//! component means.

use crate::error::{DistillError, Result};
use crate::rng::standard_normal_vec;
use crate::vecmath::{dot, logsumexp};
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != means.len() {
            return Err(DistillError::invalid(
                "weights and means must be nonempty and aligned",
            ));
        }
        if weights.iter().any(|&w| w <= 0.0) {
            return Err(DistillError::invalid("weights must be strictly positive"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(DistillError::invalid(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        let dim = means[0].len();
        if means.iter().any(|m| m.len() != dim) {
            return Err(DistillError::invalid("component means differ in dimension"));
        }
        Ok(GaussianMixture { weights, means })
    }

    pub fn standard_normal(dim: usize) -> Self {
        GaussianMixture {
            weights: vec![1.0],
            means: vec![vec![0.0; dim]],
        }
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut pick = self.weights.len() - 1;
        for (k, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                pick = k;
                break;
            }
        }
        let noise = standard_normal_vec(rng, self.dim());
        self.means[pick]
            .iter()
            .zip(&noise)
            .map(|(m, n)| m + n)
            .collect()
    }

    /// log of the density ratio against the standard Gaussian:
    /// `log sum_k w_k exp(m_k . z - |m_k|^2 / 2)`.
    pub fn log_density_ratio(&self, z: &[f64]) -> f64 {
        let logits: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.means)
            .map(|(w, m)| w.ln() + dot(m, z) - 0.5 * dot(m, m))
            .collect();
        logsumexp(&logits)
    }
}

/// Optimal transport drift toward the mixture at time `t` in [0, 1):
/// softmax over `log w_k + m_k . z - t |m_k|^2 / 2` applied to the means.
pub fn follmer_drift(z: &[f64], t: f64, mix: &GaussianMixture) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&t) {
        return Err(DistillError::invalid(format!("time {t} outside [0, 1)")));
    }
    if z.len() != mix.dim() {
        return Err(DistillError::invalid(format!(
            "state dim {} does not match mixture dim {}",
            z.len(),
            mix.dim()
        )));
    }
    let logits: Vec<f64> = mix
        .weights
        .iter()
        .zip(&mix.means)
        .map(|(w, m)| w.ln() + dot(m, z) - 0.5 * t * dot(m, m))
        .collect();
    let lse = logsumexp(&logits);
    let mut drift = vec![0.0; z.len()];
    for (logit, m) in logits.iter().zip(&mix.means) {
        let p = (logit - lse).exp();
        for (d, mi) in drift.iter_mut().zip(m) {
            *d += p * mi;
        }
    }
    Ok(drift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn rejects_bad_simplex() {
        assert!(GaussianMixture::new(vec![0.5, 0.6], vec![vec![0.0], vec![1.0]]).is_err());
        assert!(GaussianMixture::new(vec![1.0, 0.0], vec![vec![0.0], vec![1.0]]).is_err());
    }

    #[test]
    fn standard_normal_has_zero_drift() {
        let mix = GaussianMixture::standard_normal(3);
        for t in [0.0, 0.3, 0.99] {
            let d = follmer_drift(&[0.7, -1.1, 0.2], t, &mix).unwrap();
            assert!(d.iter().all(|&v| v.abs() < 1e-15));
        }
    }

    #[test]
    fn single_component_drift_is_the_mean() {
        let mix = GaussianMixture::new(vec![1.0], vec![vec![1.5, -0.5]]).unwrap();
        for (z, t) in [(vec![0.0, 0.0], 0.0), (vec![3.0, -2.0], 0.5), (vec![-1.0, 1.0], 0.9)] {
            let d = follmer_drift(&z, t, &mix).unwrap();
            assert!((d[0] - 1.5).abs() < 1e-12);
            assert!((d[1] + 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn drift_rejects_t_at_one() {
        let mix = GaussianMixture::standard_normal(1);
        assert!(follmer_drift(&[0.0], 1.0, &mix).is_err());
    }

    #[test]
    fn density_ratio_of_standard_normal_is_zero() {
        let mix = GaussianMixture::standard_normal(2);
        assert_eq!(mix.log_density_ratio(&[0.4, -0.8]), 0.0);
    }

    #[test]
    fn sampling_respects_weights() {
        let mix =
            GaussianMixture::new(vec![0.25, 0.75], vec![vec![-10.0], vec![10.0]]).unwrap();
        let mut rng = rng_from_seed(6);
        let n = 20_000;
        let mut right = 0usize;
        for _ in 0..n {
            if mix.sample(&mut rng)[0] > 0.0 {
                right += 1;
            }
        }
        let frac = right as f64 / n as f64;
        // 4 sigma of a Bernoulli(0.75) over 20k draws is about 0.012.
        assert!((frac - 0.75).abs() < 0.013, "{frac}");
    }
}
