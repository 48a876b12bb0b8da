//! Path and terminal cost functionals over particle states.

use super::sde::TrajectoryBundle;
use crate::error::{DistillError, Result};
use crate::vecmath::{cosine_sim, squared_distance};

/// Empirical quantile (lower order statistic) of the similarities between
/// `z` and every sample: index `floor(q * (n - 1))` of the sorted values.
pub fn quantile_similarity(z: &[f64], samples: &[Vec<f64>], q_tilde: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(DistillError::EmptyInput("empty sample set".into()));
    }
    if !(0.0..=1.0).contains(&q_tilde) {
        return Err(DistillError::invalid(format!(
            "quantile {q_tilde} outside [0, 1]"
        )));
    }
    let mut sims = samples
        .iter()
        .map(|w| cosine_sim(z, w))
        .collect::<Result<Vec<f64>>>()?;
    sims.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let idx = (q_tilde * (sims.len() - 1) as f64).floor() as usize;
    Ok(sims[idx])
}

/// Trapezoidal time-integral of the quantile similarity along one path.
pub fn repr_path_cost(
    path: &[Vec<f64>],
    times: &[f64],
    samples: &[Vec<f64>],
    q_tilde: f64,
) -> Result<f64> {
    if path.len() != times.len() {
        return Err(DistillError::invalid("path/times length mismatch"));
    }
    if path.len() < 2 {
        return Err(DistillError::invalid("path needs at least two nodes"));
    }
    let values = path
        .iter()
        .map(|z| quantile_similarity(z, samples, q_tilde))
        .collect::<Result<Vec<f64>>>()?;
    let mut acc = 0.0;
    for k in 0..values.len() - 1 {
        acc += 0.5 * (values[k] + values[k + 1]) * (times[k + 1] - times[k]);
    }
    Ok(acc)
}

/// Largest pairwise terminal similarity across distinct particles.
pub fn diversity_terminal_cost(bundle: &TrajectoryBundle) -> Result<f64> {
    terminal_pair_max(
        &(0..bundle.n_particles())
            .map(|p| bundle.terminal(p).to_vec())
            .collect::<Vec<_>>(),
    )
}

fn terminal_pair_max(terminals: &[Vec<f64>]) -> Result<f64> {
    if terminals.len() < 2 {
        return Err(DistillError::invalid(
            "need at least two particles for a pairwise cost",
        ));
    }
    let mut best = f64::NEG_INFINITY;
    for i in 0..terminals.len() {
        for j in i + 1..terminals.len() {
            best = best.max(cosine_sim(&terminals[i], &terminals[j])?);
        }
    }
    Ok(best)
}

/// Weighted single-level objective over terminal particle states:
/// pairwise-similarity spread term, per-particle quantile pull term and
/// squared anchor distances.
pub fn scalarized_objective(
    particles: &[Vec<f64>],
    targets: &[Vec<f64>],
    samples: &[Vec<f64>],
    lambda_r: f64,
    lambda_d: f64,
    q_tilde: f64,
) -> Result<f64> {
    if particles.len() != targets.len() {
        return Err(DistillError::invalid(format!(
            "{} particles but {} targets",
            particles.len(),
            targets.len()
        )));
    }
    if particles.is_empty() {
        return Err(DistillError::EmptyInput("no particles".into()));
    }
    let spread = if lambda_d != 0.0 {
        lambda_d * terminal_pair_max(particles)?
    } else {
        0.0
    };
    let mut acc = spread;
    for (p, z0) in particles.iter().zip(targets) {
        if lambda_r != 0.0 {
            acc -= lambda_r * quantile_similarity(p, samples, q_tilde)?;
        }
        acc += squared_distance(p, z0);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::sde::{simulate_sde, SdeOptions};
    use crate::rng::{rng_from_seed, standard_normal_vec};

    #[test]
    fn quantile_endpoints_are_min_and_max() {
        let samples: Vec<Vec<f64>> = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0]];
        let z = vec![1.0, 0.0];
        let lo = quantile_similarity(&z, &samples, 0.0).unwrap();
        let hi = quantile_similarity(&z, &samples, 1.0).unwrap();
        assert_eq!(lo, -1.0);
        assert_eq!(hi, 1.0);
    }

    #[test]
    fn small_quantile_of_fifty_samples_is_minimum() {
        let mut rng = rng_from_seed(3);
        let samples: Vec<Vec<f64>> = (0..50).map(|_| standard_normal_vec(&mut rng, 4)).collect();
        let z = standard_normal_vec(&mut rng, 4);
        // Sort-based oracle.
        let mut sims: Vec<f64> = samples
            .iter()
            .map(|w| cosine_sim(&z, w).unwrap())
            .collect();
        sims.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let got = quantile_similarity(&z, &samples, 0.02).unwrap();
        assert_eq!(got, sims[0]);
    }

    #[test]
    fn quantile_monotone_in_q() {
        let mut rng = rng_from_seed(4);
        let samples: Vec<Vec<f64>> = (0..20).map(|_| standard_normal_vec(&mut rng, 3)).collect();
        let z = standard_normal_vec(&mut rng, 3);
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=10 {
            let q = i as f64 / 10.0;
            let v = quantile_similarity(&z, &samples, q).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn empty_samples_rejected() {
        assert!(quantile_similarity(&[1.0], &[], 0.5).is_err());
    }

    #[test]
    fn constant_path_cost_is_the_constant() {
        // sigma is scale-free, so a radially scaled path has constant value.
        let samples = vec![vec![1.0, 1.0]];
        let path: Vec<Vec<f64>> = (1..=5).map(|k| vec![k as f64, 0.0]).collect();
        let times: Vec<f64> = (0..5).map(|k| k as f64 / 4.0).collect();
        let c = cosine_sim(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        let cost = repr_path_cost(&path, &times, &samples, 0.0).unwrap();
        assert!((cost - c).abs() < 1e-12);
    }

    #[test]
    fn two_node_path_is_trapezoid() {
        let samples = vec![vec![1.0, 0.0]];
        let path = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let times = vec![0.0, 1.0];
        let a = 1.0;
        let b = 0.0;
        let cost = repr_path_cost(&path, &times, &samples, 0.0).unwrap();
        assert!((cost - 0.5 * (a + b)).abs() < 1e-12);
    }

    #[test]
    fn path_cost_matches_refined_grid() {
        // Straight-line path sampled at two resolutions; the coarse
        // trapezoid must agree with a dense one within a loose tolerance.
        let samples = vec![vec![1.0, 0.2], vec![-0.3, 1.0]];
        let start = [2.0, -1.0];
        let end = [1.0, 2.5];
        let path_at = |n: usize| -> (Vec<Vec<f64>>, Vec<f64>) {
            let pts = (0..=n)
                .map(|k| {
                    let a = k as f64 / n as f64;
                    vec![
                        start[0] + a * (end[0] - start[0]),
                        start[1] + a * (end[1] - start[1]),
                    ]
                })
                .collect();
            let ts = (0..=n).map(|k| k as f64 / n as f64).collect();
            (pts, ts)
        };
        let (coarse_p, coarse_t) = path_at(64);
        let (fine_p, fine_t) = path_at(4096);
        let coarse = repr_path_cost(&coarse_p, &coarse_t, &samples, 0.0).unwrap();
        let fine = repr_path_cost(&fine_p, &fine_t, &samples, 0.0).unwrap();
        assert!((coarse - fine).abs() < 1e-3, "{coarse} vs {fine}");
    }

    #[test]
    fn diversity_terminal_cases() {
        let bundle = simulate_sde(
            |_, _| Ok(vec![0.0, 0.0]),
            &[1.0, 0.0],
            2,
            2,
            0,
            SdeOptions { noise_scale: 0.0 },
        )
        .unwrap();
        // Identical terminals.
        assert!((diversity_terminal_cost(&bundle).unwrap() - 1.0).abs() < 1e-12);
        let single = simulate_sde(
            |_, _| Ok(vec![0.0, 0.0]),
            &[1.0, 0.0],
            2,
            1,
            0,
            SdeOptions { noise_scale: 0.0 },
        )
        .unwrap();
        assert!(diversity_terminal_cost(&single).is_err());
    }

    #[test]
    fn diversity_matches_all_pairs_scan_and_permutation_invariant() {
        let mut rng = rng_from_seed(9);
        let terminals: Vec<Vec<f64>> = (0..5).map(|_| standard_normal_vec(&mut rng, 3)).collect();
        let mut best = f64::NEG_INFINITY;
        for i in 0..5 {
            for j in i + 1..5 {
                best = best.max(cosine_sim(&terminals[i], &terminals[j]).unwrap());
            }
        }
        assert_eq!(terminal_pair_max(&terminals).unwrap(), best);
        let mut reversed = terminals.clone();
        reversed.reverse();
        assert_eq!(terminal_pair_max(&reversed).unwrap(), best);
    }

    #[test]
    fn scalarized_ablation_is_anchor_only() {
        let particles = vec![vec![1.0, 0.0], vec![0.0, 2.0]];
        let targets = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        let v = scalarized_objective(&particles, &targets, &[vec![1.0, 1.0]], 0.0, 0.0, 0.0)
            .unwrap();
        assert!((v - (1.0 + 4.0)).abs() < 1e-12);
    }

    #[test]
    fn scalarized_matches_term_by_term_oracle() {
        let mut rng = rng_from_seed(12);
        for _ in 0..10 {
            let particles: Vec<Vec<f64>> =
                (0..3).map(|_| standard_normal_vec(&mut rng, 2)).collect();
            let targets: Vec<Vec<f64>> =
                (0..3).map(|_| standard_normal_vec(&mut rng, 2)).collect();
            let samples: Vec<Vec<f64>> =
                (0..6).map(|_| standard_normal_vec(&mut rng, 2)).collect();
            let (lr, ld, q) = (0.7, 0.4, 0.25);
            // Independent recomputation.
            let mut pair = f64::NEG_INFINITY;
            for i in 0..3 {
                for j in i + 1..3 {
                    pair = pair.max(cosine_sim(&particles[i], &particles[j]).unwrap());
                }
            }
            let mut oracle = ld * pair;
            for (p, t) in particles.iter().zip(&targets) {
                oracle -= lr * quantile_similarity(p, &samples, q).unwrap();
                oracle += squared_distance(p, t);
            }
            let got =
                scalarized_objective(&particles, &targets, &samples, lr, ld, q).unwrap();
            assert!((got - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn scalarized_identical_pair_exact() {
        // particles == anchors, two identical particles: anchor term zero,
        // spread term exactly lambda_d.
        let p = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let samples = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let (lr, ld) = (0.3, 0.9);
        let got = scalarized_objective(&p, &p, &samples, lr, ld, 0.0).unwrap();
        let q = quantile_similarity(&p[0], &samples, 0.0).unwrap();
        assert!((got - (ld * 1.0 - 2.0 * lr * q)).abs() < 1e-12);
    }

    #[test]
    fn scalarized_index_mismatch_rejected() {
        assert!(scalarized_objective(&[vec![1.0]], &[], &[vec![1.0]], 0.1, 0.1, 0.0).is_err());
    }
}
