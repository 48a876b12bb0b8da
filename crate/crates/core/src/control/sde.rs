//! Euler-Maruyama particle simulation and the cost-to-go estimate.

use super::mixture::GaussianMixture;
use crate::error::{DistillError, Result};
use crate::rng::{derive_rng, standard_normal_vec};
use crate::vecmath::{all_finite, dot};

/// Particle trajectories on the uniform grid over [0, 1], with the drift
/// recorded at every step so path costs can be integrated afterwards.
#[derive(Debug, Clone)]
pub struct TrajectoryBundle {
    /// `states[p][k]` is particle p at grid node k (k = 0 is the start).
    pub states: Vec<Vec<Vec<f64>>>,
    /// `drifts[p][k]` is the drift applied at node k (one per step).
    pub drifts: Vec<Vec<Vec<f64>>>,
    pub times: Vec<f64>,
    pub seed: u64,
}

impl TrajectoryBundle {
    pub fn n_particles(&self) -> usize {
        self.states.len()
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn terminal(&self, particle: usize) -> &[f64] {
        self.states[particle].last().expect("nonempty path")
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SdeOptions {
    /// Scales the Brownian increments; zero turns the noise off entirely.
    pub noise_scale: f64,
}

impl Default for SdeOptions {
    fn default() -> Self {
        SdeOptions { noise_scale: 1.0 }
    }
}

/// Euler-Maruyama with unit diffusion: each particle gets its own seeded
/// noise stream, so results are identical for identical seeds regardless
/// of particle count ordering.
pub fn simulate_sde(
    drift: impl Fn(&[f64], f64) -> Result<Vec<f64>>,
    z0: &[f64],
    steps: usize,
    n_particles: usize,
    seed: u64,
    opts: SdeOptions,
) -> Result<TrajectoryBundle> {
    if steps == 0 {
        return Err(DistillError::invalid("steps must be positive"));
    }
    let dim = z0.len();
    let dt = 1.0 / steps as f64;
    let sqrt_dt = dt.sqrt();
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 / steps as f64).collect();

    let mut states = Vec::with_capacity(n_particles);
    let mut drifts = Vec::with_capacity(n_particles);
    for p in 0..n_particles {
        let mut rng = derive_rng(seed, p as u64);
        let mut path = Vec::with_capacity(steps + 1);
        let mut drift_row = Vec::with_capacity(steps);
        let mut z = z0.to_vec();
        path.push(z.clone());
        for k in 0..steps {
            let t = times[k];
            let u = drift(&z, t)?;
            if u.len() != dim {
                return Err(DistillError::invalid(format!(
                    "drift returned dim {} at step {k}, expected {dim}",
                    u.len()
                )));
            }
            let xi = standard_normal_vec(&mut rng, dim);
            for i in 0..dim {
                z[i] += u[i] * dt + opts.noise_scale * sqrt_dt * xi[i];
            }
            if !all_finite(&z) {
                return Err(DistillError::numeric(format!(
                    "non-finite state at step {} (particle {p})",
                    k + 1
                )));
            }
            drift_row.push(u);
            path.push(z.clone());
        }
        states.push(path);
        drifts.push(drift_row);
    }
    Ok(TrajectoryBundle {
        states,
        drifts,
        times,
        seed,
    })
}

/// Monte-Carlo cost-to-go: control energy along the paths plus the terminal
/// log-density penalty against the target mixture.
#[derive(Debug, Clone, Copy)]
pub struct CostEstimate {
    pub value: f64,
    /// Paths whose terminal density ratio underflowed and was clipped.
    pub clipped: usize,
}

pub fn cost_to_go_estimate(bundle: &TrajectoryBundle, mix: &GaussianMixture) -> Result<CostEstimate> {
    if bundle.n_particles() == 0 {
        return Err(DistillError::EmptyInput("bundle has no particles".into()));
    }
    let dt = 1.0 / bundle.steps() as f64;
    let mut total = 0.0;
    let mut clipped = 0usize;
    for p in 0..bundle.n_particles() {
        let energy: f64 = bundle.drifts[p]
            .iter()
            .map(|u| 0.5 * dot(u, u) * dt)
            .sum();
        let mut log_f = mix.log_density_ratio(bundle.terminal(p));
        if !log_f.is_finite() {
            clipped += 1;
            log_f = f64::MIN_POSITIVE.ln();
        }
        total += energy - log_f;
    }
    Ok(CostEstimate {
        value: total / bundle.n_particles() as f64,
        clipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::mixture::follmer_drift;

    #[test]
    fn zero_drift_no_noise_is_constant() {
        let z0 = vec![1.0, -2.0];
        let bundle = simulate_sde(
            |_, _| Ok(vec![0.0, 0.0]),
            &z0,
            10,
            3,
            0,
            SdeOptions { noise_scale: 0.0 },
        )
        .unwrap();
        for p in 0..3 {
            for state in &bundle.states[p] {
                assert_eq!(state, &z0);
            }
        }
    }

    #[test]
    fn constant_drift_no_noise_integrates_exactly() {
        let bundle = simulate_sde(
            |_, _| Ok(vec![0.7, -0.3]),
            &[0.0, 0.0],
            100,
            1,
            0,
            SdeOptions { noise_scale: 0.0 },
        )
        .unwrap();
        let end = bundle.terminal(0);
        assert!((end[0] - 0.7).abs() < 1e-12);
        assert!((end[1] + 0.3).abs() < 1e-12);
    }

    #[test]
    fn zero_drift_terminal_variance_near_one() {
        let n = 10_000;
        let bundle = simulate_sde(
            |_, _| Ok(vec![0.0]),
            &[0.0],
            50,
            n,
            7,
            SdeOptions::default(),
        )
        .unwrap();
        let terminals: Vec<f64> = (0..n).map(|p| bundle.terminal(p)[0]).collect();
        let mean = terminals.iter().sum::<f64>() / n as f64;
        let var = terminals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        // Var of the sample variance of a Gaussian is 2 sigma^4 / n.
        let se = (2.0 / n as f64).sqrt();
        assert!((var - 1.0).abs() < 4.0 * se, "variance {var}");
        assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn first_slice_equals_start_and_times_increase() {
        let bundle = simulate_sde(
            |_, _| Ok(vec![0.1]),
            &[0.5],
            7,
            4,
            3,
            SdeOptions::default(),
        )
        .unwrap();
        assert_eq!(bundle.times[0], 0.0);
        assert_eq!(*bundle.times.last().unwrap(), 1.0);
        for w in bundle.times.windows(2) {
            assert!(w[1] > w[0]);
        }
        for p in 0..4 {
            assert_eq!(bundle.states[p][0], vec![0.5]);
        }
    }

    #[test]
    fn seed_determinism() {
        let run = || {
            simulate_sde(
                |z, t| Ok(vec![-z[0] * (1.0 - t)]),
                &[1.0],
                20,
                5,
                11,
                SdeOptions::default(),
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.states, b.states);
    }

    #[test]
    fn cost_zero_for_standard_normal_zero_drift() {
        let mix = GaussianMixture::standard_normal(1);
        let bundle = simulate_sde(
            |_, _| Ok(vec![0.0]),
            &[0.0],
            20,
            2_000,
            13,
            SdeOptions::default(),
        )
        .unwrap();
        let est = cost_to_go_estimate(&bundle, &mix).unwrap();
        assert_eq!(est.clipped, 0);
        // Both the energy and the log-ratio vanish identically.
        assert!(est.value.abs() < 1e-12, "{}", est.value);
    }

    #[test]
    fn constant_drift_energy_term_exact() {
        let m = vec![1.2, -0.4];
        let mix = GaussianMixture::new(vec![1.0], vec![m.clone()]).unwrap();
        let bundle = simulate_sde(
            |_, _| Ok(m.clone()),
            &[0.0, 0.0],
            40,
            1,
            0,
            SdeOptions { noise_scale: 0.0 },
        )
        .unwrap();
        let est = cost_to_go_estimate(&bundle, &mix).unwrap();
        // Deterministic path ends exactly at m, so log f(Z_1) = |m|^2 / 2
        // and the energy term is |m|^2 / 2 as well: they cancel.
        let energy = 0.5 * dot(&m, &m);
        let log_f = mix.log_density_ratio(&m);
        assert!((log_f - energy).abs() < 1e-12);
        assert!(est.value.abs() < 1e-10, "{}", est.value);
    }

    #[test]
    fn follmer_beats_perturbed_drift() {
        let mix = GaussianMixture::new(vec![1.0], vec![vec![1.5]]).unwrap();
        let steps = 100;
        let n = 10_000;
        let good = simulate_sde(
            |z, t| follmer_drift(z, t, &mix),
            &[0.0],
            steps,
            n,
            21,
            SdeOptions::default(),
        )
        .unwrap();
        let bad = simulate_sde(
            |z, t| {
                let mut u = follmer_drift(z, t, &mix)?;
                u[0] += 0.8;
                Ok(u)
            },
            &[0.0],
            steps,
            n,
            21,
            SdeOptions::default(),
        )
        .unwrap();
        let jg = cost_to_go_estimate(&good, &mix).unwrap().value;
        let jb = cost_to_go_estimate(&bad, &mix).unwrap().value;
        assert!(jg < jb, "optimal {jg} not below perturbed {jb}");
    }
}
