//! Class-conditional denoising-diffusion machinery.
//!
//! Schedules, the forward noising process, the plain noise-prediction loss,
//! clean-embedding recovery and multi-step sampling. Everything operates on
//! flat `Vec<f64>` embeddings.

pub mod denoiser;
pub mod encoder;

use crate::error::{DistillError, Result};
use crate::rng::{derive_rng, standard_normal_vec};
use crate::vecmath::check_same_dim;

pub use denoiser::Denoiser;
pub use encoder::EncoderDecoder;

pub const LINEAR_BETA_START: f64 = 1e-4;
pub const LINEAR_BETA_END: f64 = 2e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Linear,
    Cosine,
}

/// Discrete noise schedule over steps `1..=T`.
///
/// `alpha_bar` has length `T + 1` with `alpha_bar[0] = 1`, so `alpha_bar[t]`
/// is the cumulative signal retention after `t` noising steps.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    pub timesteps: usize,
    pub kind: ScheduleKind,
    pub betas: Vec<f64>,
    pub alpha_bar: Vec<f64>,
}

impl NoiseSchedule {
    pub fn new(timesteps: usize, kind: ScheduleKind) -> Result<Self> {
        if timesteps == 0 {
            return Err(DistillError::invalid("step count must be positive"));
        }
        let betas = match kind {
            ScheduleKind::Linear => linear_betas(timesteps),
            ScheduleKind::Cosine => cosine_betas(timesteps),
        };
        let mut alpha_bar = Vec::with_capacity(timesteps + 1);
        alpha_bar.push(1.0);
        let mut prod = 1.0;
        for beta in &betas {
            prod *= 1.0 - beta;
            alpha_bar.push(prod);
        }
        Ok(NoiseSchedule {
            timesteps,
            kind,
            betas,
            alpha_bar,
        })
    }

    pub fn alpha_bar_at(&self, t: usize) -> Result<f64> {
        if t > self.timesteps {
            return Err(DistillError::invalid(format!(
                "step {t} out of range 0..={}",
                self.timesteps
            )));
        }
        Ok(self.alpha_bar[t])
    }

    fn check_step(&self, t: usize) -> Result<()> {
        if t < 1 || t > self.timesteps {
            return Err(DistillError::invalid(format!(
                "step {t} out of range 1..={}",
                self.timesteps
            )));
        }
        Ok(())
    }
}

fn linear_betas(timesteps: usize) -> Vec<f64> {
    if timesteps == 1 {
        return vec![LINEAR_BETA_START];
    }
    (0..timesteps)
        .map(|i| {
            LINEAR_BETA_START
                + (LINEAR_BETA_END - LINEAR_BETA_START) * i as f64 / (timesteps - 1) as f64
        })
        .collect()
}

/// Squared-cosine signal retention; betas derived and clipped, then the
/// cumulative product is rebuilt from the clipped betas so the schedule
/// invariants hold exactly.
fn cosine_betas(timesteps: usize) -> Vec<f64> {
    const S: f64 = 0.008;
    let f = |t: f64| {
        let x = (t / timesteps as f64 + S) / (1.0 + S) * std::f64::consts::FRAC_PI_2;
        x.cos().powi(2)
    };
    let f0 = f(0.0);
    (1..=timesteps)
        .map(|t| {
            let curr = f(t as f64) / f0;
            let prev = f((t - 1) as f64) / f0;
            (1.0 - curr / prev).clamp(1e-8, 0.999)
        })
        .collect()
}

/// One forward-noising draw: original embedding, the step, the noise and the
/// resulting noised embedding.
#[derive(Debug, Clone)]
pub struct NoisingSample {
    pub z0: Vec<f64>,
    pub t: usize,
    pub eps: Vec<f64>,
    pub zt: Vec<f64>,
}

impl NoisingSample {
    pub fn new(z0: Vec<f64>, t: usize, eps: Vec<f64>, schedule: &NoiseSchedule) -> Result<Self> {
        let zt = forward_noise(&z0, t, &eps, schedule)?;
        Ok(NoisingSample { z0, t, eps, zt })
    }
}

/// `sqrt(alpha_bar[t]) * z0 + sqrt(1 - alpha_bar[t]) * eps`.
pub fn forward_noise(z0: &[f64], t: usize, eps: &[f64], schedule: &NoiseSchedule) -> Result<Vec<f64>> {
    schedule.check_step(t)?;
    check_same_dim(z0, eps)?;
    let ab = schedule.alpha_bar[t];
    let (sa, sn) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(z0.iter().zip(eps).map(|(z, e)| sa * z + sn * e).collect())
}

/// Squared Euclidean distance between predicted and true noise.
pub fn simple_loss(eps_pred: &[f64], eps: &[f64]) -> Result<f64> {
    check_same_dim(eps_pred, eps)?;
    Ok(eps_pred.iter().zip(eps).map(|(p, e)| (p - e) * (p - e)).sum())
}

/// Batch version: per-sample squared error averaged over the batch.
pub fn simple_loss_batch(eps_pred: &[Vec<f64>], eps: &[Vec<f64>]) -> Result<f64> {
    if eps_pred.len() != eps.len() {
        return Err(DistillError::invalid("batch size mismatch"));
    }
    if eps_pred.is_empty() {
        return Err(DistillError::EmptyInput("empty batch".into()));
    }
    let mut total = 0.0;
    for (p, e) in eps_pred.iter().zip(eps) {
        total += simple_loss(p, e)?;
    }
    Ok(total / eps_pred.len() as f64)
}

/// How the clean embedding is recovered from a noise prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZhatMode {
    /// `zt - eps_pred`, the plain subtraction form. Default.
    PaperLiteral,
    /// `(zt - sqrt(1 - alpha_bar) * eps_pred) / sqrt(alpha_bar)`, the exact
    /// inversion of the forward process.
    DdpmExact,
}

impl Default for ZhatMode {
    fn default() -> Self {
        ZhatMode::PaperLiteral
    }
}

pub fn predict_clean_embedding(
    zt: &[f64],
    eps_pred: &[f64],
    mode: ZhatMode,
    t: usize,
    schedule: &NoiseSchedule,
) -> Result<Vec<f64>> {
    check_same_dim(zt, eps_pred)?;
    match mode {
        ZhatMode::PaperLiteral => Ok(zt.iter().zip(eps_pred).map(|(z, e)| z - e).collect()),
        ZhatMode::DdpmExact => {
            schedule.check_step(t)?;
            let ab = schedule.alpha_bar[t];
            let (sa, sn) = (ab.sqrt(), (1.0 - ab).sqrt());
            Ok(zt.iter().zip(eps_pred).map(|(z, e)| (z - sn * e) / sa).collect())
        }
    }
}

/// Scaling factor mapping a perturbation of the noise prediction to the
/// resulting perturbation of the recovered clean embedding.
pub fn zhat_grad_factor(mode: ZhatMode, t: usize, schedule: &NoiseSchedule) -> Result<f64> {
    match mode {
        ZhatMode::PaperLiteral => Ok(-1.0),
        ZhatMode::DdpmExact => {
            schedule.check_step(t)?;
            let ab = schedule.alpha_bar[t];
            Ok(-(1.0 - ab).sqrt() / ab.sqrt())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    /// Variance-free update; same seed gives bit-identical batches.
    Deterministic,
    /// Ancestral update with fresh noise at every step.
    Stochastic,
}

impl Default for SamplerKind {
    fn default() -> Self {
        SamplerKind::Deterministic
    }
}

/// Evenly spaced sub-schedule `T = t_n > t_{n-1} > ... > t_0 = 0`.
fn sample_times(timesteps: usize, n_steps: usize) -> Vec<usize> {
    (0..=n_steps)
        .rev()
        .map(|k| ((timesteps * k) as f64 / n_steps as f64).round() as usize)
        .collect()
}

/// Generates `count` embeddings for `class_label` by iterative denoising
/// from standard-normal starts along `n_steps` evenly spaced steps.
pub fn ancestral_sample(
    model: &Denoiser,
    schedule: &NoiseSchedule,
    class_label: usize,
    n_steps: usize,
    count: usize,
    seed: u64,
    sampler: SamplerKind,
) -> Result<Vec<Vec<f64>>> {
    ancestral_sample_clipped(model, schedule, class_label, n_steps, count, seed, sampler, None)
}

/// `ancestral_sample` with an optional norm band for the per-step clean
/// estimate. Prediction-magnitude errors compound multiplicatively along
/// the reverse path, so projecting the intermediate estimate onto the
/// known data support (the image-model analog clips to the pixel box)
/// keeps weak models from drifting off the manifold.
#[allow(clippy::too_many_arguments)]
pub fn ancestral_sample_clipped(
    model: &Denoiser,
    schedule: &NoiseSchedule,
    class_label: usize,
    n_steps: usize,
    count: usize,
    seed: u64,
    sampler: SamplerKind,
    clip_norm: Option<(f64, f64)>,
) -> Result<Vec<Vec<f64>>> {
    if n_steps == 0 || n_steps > schedule.timesteps {
        return Err(DistillError::invalid(format!(
            "n_steps {n_steps} out of range 1..={}",
            schedule.timesteps
        )));
    }
    if class_label >= model.class_count {
        return Err(DistillError::invalid(format!(
            "class label {class_label} outside class set of size {}",
            model.class_count
        )));
    }
    let times = sample_times(schedule.timesteps, n_steps);
    let dim = model.dim;
    let mut out = Vec::with_capacity(count);
    for particle in 0..count {
        let mut rng = derive_rng(seed, particle as u64);
        let mut z = standard_normal_vec(&mut rng, dim);
        for w in times.windows(2) {
            let (t_now, t_next) = (w[0], w[1]);
            let eps_hat = model.predict_noise(&z, t_now, class_label, schedule.timesteps);
            let ab_now = schedule.alpha_bar[t_now];
            let ab_next = schedule.alpha_bar[t_next];
            let mut z0_pred: Vec<f64> = z
                .iter()
                .zip(&eps_hat)
                .map(|(zi, ei)| (zi - (1.0 - ab_now).sqrt() * ei) / ab_now.sqrt())
                .collect();
            if let Some((lo, hi)) = clip_norm {
                let norm = z0_pred.iter().map(|v| v * v).sum::<f64>().sqrt();
                let target = norm.clamp(lo, hi);
                if norm > 1e-12 && target != norm {
                    for v in &mut z0_pred {
                        *v *= target / norm;
                    }
                }
            }
            let sigma = match sampler {
                SamplerKind::Deterministic => 0.0,
                SamplerKind::Stochastic => {
                    // Ancestral variance for the jump t_now -> t_next.
                    ((1.0 - ab_next) / (1.0 - ab_now) * (1.0 - ab_now / ab_next)).max(0.0).sqrt()
                }
            };
            let dir_coeff = (1.0 - ab_next - sigma * sigma).max(0.0).sqrt();
            let noise = if sigma > 0.0 && t_next > 0 {
                standard_normal_vec(&mut rng, dim)
            } else {
                vec![0.0; dim]
            };
            for i in 0..dim {
                z[i] = ab_next.sqrt() * z0_pred[i] + dir_coeff * eps_hat[i] + sigma * noise[i];
            }
        }
        out.push(z);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;
    use crate::rng::rng_from_seed;

    #[test]
    fn single_step_linear_schedule() {
        let s = NoiseSchedule::new(1, ScheduleKind::Linear).unwrap();
        assert_eq!(s.alpha_bar, vec![1.0, 1.0 - 1e-4]);
    }

    #[test]
    fn linear_schedule_monotone_and_small_tail() {
        let s = NoiseSchedule::new(1000, ScheduleKind::Linear).unwrap();
        // Independent cumulative product.
        let mut prod = 1.0;
        for (t, beta) in s.betas.iter().enumerate() {
            prod *= 1.0 - beta;
            assert!((s.alpha_bar[t + 1] - prod).abs() < 1e-12);
            assert!(s.alpha_bar[t + 1] < s.alpha_bar[t]);
            assert!(s.alpha_bar[t + 1] > 0.0 && s.alpha_bar[t + 1] <= 1.0);
        }
        assert!(s.alpha_bar[1000] < 0.01);
    }

    #[test]
    fn cosine_schedule_invariants() {
        let s = NoiseSchedule::new(250, ScheduleKind::Cosine).unwrap();
        let mut prod = 1.0;
        for (t, beta) in s.betas.iter().enumerate() {
            prod *= 1.0 - beta;
            assert!((s.alpha_bar[t + 1] - prod).abs() < 1e-12);
            assert!(s.alpha_bar[t + 1] < s.alpha_bar[t]);
        }
    }

    #[test]
    fn zero_timesteps_rejected() {
        assert!(NoiseSchedule::new(0, ScheduleKind::Linear).is_err());
    }

    #[test]
    fn forward_noise_closed_form() {
        // alpha_bar = 0.25 -> coefficients 0.5 and sqrt(0.75).
        let mut s = NoiseSchedule::new(1, ScheduleKind::Linear).unwrap();
        s.alpha_bar[1] = 0.25;
        let zt = forward_noise(&[1.0, 0.0], 1, &[0.0, 1.0], &s).unwrap();
        assert!((zt[0] - 0.5).abs() < 1e-15);
        assert!((zt[1] - 0.75f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn forward_noise_limits() {
        let mut s = NoiseSchedule::new(1, ScheduleKind::Linear).unwrap();
        let z0 = vec![2.0, -1.0];
        let eps = vec![0.5, 0.25];
        s.alpha_bar[1] = 1.0;
        assert_eq!(forward_noise(&z0, 1, &eps, &s).unwrap(), z0);
        s.alpha_bar[1] = 0.0;
        assert_eq!(forward_noise(&z0, 1, &eps, &s).unwrap(), eps);
    }

    #[test]
    fn forward_noise_validates() {
        let s = NoiseSchedule::new(10, ScheduleKind::Linear).unwrap();
        assert!(forward_noise(&[1.0], 0, &[1.0], &s).is_err());
        assert!(forward_noise(&[1.0], 11, &[1.0], &s).is_err());
        assert!(forward_noise(&[1.0], 5, &[1.0, 2.0], &s).is_err());
    }

    #[test]
    fn simple_loss_cases() {
        assert_eq!(simple_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(simple_loss(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert!(simple_loss(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn simple_loss_matches_elementwise_oracle() {
        let a = vec![0.3, -1.2, 0.7, 2.2, -0.4];
        let b = vec![1.1, 0.0, -0.3, 2.0, 0.9];
        let mut oracle = 0.0;
        for i in 0..5 {
            oracle += (a[i] - b[i]) * (a[i] - b[i]);
        }
        assert!((simple_loss(&a, &b).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn simple_loss_symmetric_and_zero_iff_equal() {
        let a = vec![0.5, -0.1];
        let b = vec![0.2, 0.4];
        assert_eq!(simple_loss(&a, &b).unwrap(), simple_loss(&b, &a).unwrap());
        assert!(simple_loss(&a, &b).unwrap() > 0.0);
    }

    #[test]
    fn predict_clean_paper_literal() {
        let s = NoiseSchedule::new(10, ScheduleKind::Linear).unwrap();
        let zt = vec![1.0, 1.0];
        let out = predict_clean_embedding(&zt, &[0.5, 0.0], ZhatMode::PaperLiteral, 3, &s).unwrap();
        assert_eq!(out, vec![0.5, 1.0]);
        let same = predict_clean_embedding(&zt, &[0.0, 0.0], ZhatMode::PaperLiteral, 3, &s).unwrap();
        assert_eq!(same, zt);
    }

    #[test]
    fn ddpm_exact_inverts_forward() {
        let s = NoiseSchedule::new(100, ScheduleKind::Linear).unwrap();
        let z0 = vec![1.3, -0.8, 0.2];
        let eps = vec![0.4, 1.1, -0.9];
        for t in [1, 37, 100] {
            let sample = NoisingSample::new(z0.clone(), t, eps.clone(), &s).unwrap();
            let rec =
                predict_clean_embedding(&sample.zt, &eps, ZhatMode::DdpmExact, t, &s).unwrap();
            for (r, z) in rec.iter().zip(&z0) {
                assert!((r - z).abs() < 1e-10);
            }
        }
    }

    fn zero_model(dim: usize) -> Denoiser {
        let mut rng = rng_from_seed(0);
        let mut m = Denoiser::init(dim, 2, 4, 4, &[8], Activation::Tanh, &mut rng);
        let zeros = vec![0.0; m.param_count()];
        m.set_params_flat(&zeros);
        m
    }

    #[test]
    fn deterministic_sampling_with_zero_model_rescales_noise() {
        // With eps_hat = 0 each update multiplies by
        // sqrt(ab_next)/sqrt(ab_now), telescoping to 1/sqrt(ab_T).
        let s = NoiseSchedule::new(10, ScheduleKind::Linear).unwrap();
        let model = zero_model(3);
        let got = ancestral_sample(&model, &s, 0, 2, 1, 42, SamplerKind::Deterministic).unwrap();

        let mut rng = derive_rng(42, 0);
        let start = standard_normal_vec(&mut rng, 3);
        // Hand-rolled two-step recurrence: t 10 -> 5 -> 0.
        let ab10 = s.alpha_bar[10];
        let ab5 = s.alpha_bar[5];
        let step1: Vec<f64> = start.iter().map(|z| {
            let z0p = z / ab10.sqrt();
            ab5.sqrt() * z0p
        }).collect();
        let expected: Vec<f64> = step1.iter().map(|z| z / ab5.sqrt()).collect();
        for (g, e) in got[0].iter().zip(&expected) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let s = NoiseSchedule::new(50, ScheduleKind::Linear).unwrap();
        let mut rng = rng_from_seed(9);
        let model = Denoiser::init(2, 3, 4, 4, &[8], Activation::Tanh, &mut rng);
        for kind in [SamplerKind::Deterministic, SamplerKind::Stochastic] {
            let a = ancestral_sample(&model, &s, 1, 10, 4, 7, kind).unwrap();
            let b = ancestral_sample(&model, &s, 1, 10, 4, 7, kind).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn sampling_empty_and_invalid() {
        let s = NoiseSchedule::new(10, ScheduleKind::Linear).unwrap();
        let model = zero_model(2);
        let empty = ancestral_sample(&model, &s, 0, 5, 0, 1, SamplerKind::Deterministic).unwrap();
        assert!(empty.is_empty());
        assert!(ancestral_sample(&model, &s, 0, 11, 1, 1, SamplerKind::Deterministic).is_err());
    }

    #[test]
    fn sample_times_strictly_decreasing() {
        for (timesteps, n) in [(1000, 50), (10, 10), (3, 2), (7, 5)] {
            let times = sample_times(timesteps, n);
            assert_eq!(times[0], timesteps);
            assert_eq!(*times.last().unwrap(), 0);
            for w in times.windows(2) {
                assert!(w[0] > w[1], "not decreasing: {times:?}");
            }
        }
    }
}
