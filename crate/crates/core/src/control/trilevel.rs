//! Lexicographic solver for the constructed three-level toy problem.
//!
//! The inner level is a radial fidelity objective whose minimizer set is a
//! whole circle, so the outer levels have room to act: the middle level
//! keeps only points most similar to the sample population (by quantile),
//! the top level then spreads the particles apart. Everything is solved by
//! dense grid search so tests can replay it exactly.

use super::costs::quantile_similarity;
use crate::error::{DistillError, Result};
use crate::vecmath::cosine_sim;
use serde::Serialize;

#[derive(Debug, Clone)]
pub struct TrilevelInstance {
    /// Empirical target population.
    pub samples: Vec<Vec<f64>>,
    pub n_particles: usize,
    pub q_tilde: f64,
    /// Radius of the inner-level minimizer circle.
    pub radius: f64,
    /// Grid points per axis.
    pub grid_resolution: usize,
    /// Half-width of the square grid.
    pub grid_extent: f64,
}

impl TrilevelInstance {
    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(DistillError::EmptyInput("instance needs samples".into()));
        }
        if self.samples.iter().any(|s| s.len() != 2) {
            return Err(DistillError::invalid("toy instances are two-dimensional"));
        }
        if self.n_particles < 2 {
            return Err(DistillError::invalid("need at least two particles"));
        }
        if !(0.0..=1.0).contains(&self.q_tilde) {
            return Err(DistillError::invalid("quantile outside [0, 1]"));
        }
        if self.grid_resolution < 50 {
            return Err(DistillError::Resolution(
                "grid resolution below 50 per axis".into(),
            ));
        }
        if !(self.radius > 0.0) || self.grid_extent <= self.radius {
            return Err(DistillError::invalid(
                "radius must be positive and inside the grid extent",
            ));
        }
        Ok(())
    }

    pub fn grid_spacing(&self) -> f64 {
        2.0 * self.grid_extent / (self.grid_resolution - 1) as f64
    }

    /// Inner feasibility slack: one squared grid cell.
    pub fn inner_tolerance(&self) -> f64 {
        self.grid_spacing().powi(2)
    }

    /// Middle-level slack absorbing quantization of the similarity values.
    pub fn middle_tolerance(&self) -> f64 {
        self.grid_spacing() / self.radius
    }

    pub fn inner_objective(&self, p: &[f64]) -> f64 {
        let norm = (p[0] * p[0] + p[1] * p[1]).sqrt();
        (norm - self.radius) * (norm - self.radius)
    }

    pub fn grid_points(&self) -> Vec<Vec<f64>> {
        let n = self.grid_resolution;
        let mut pts = Vec::with_capacity(n * n);
        for iy in 0..n {
            for ix in 0..n {
                let x = -self.grid_extent + 2.0 * self.grid_extent * ix as f64 / (n - 1) as f64;
                let y = -self.grid_extent + 2.0 * self.grid_extent * iy as f64 / (n - 1) as f64;
                pts.push(vec![x, y]);
            }
        }
        pts
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrilevelSolution {
    pub positions: Vec<Vec<f64>>,
    /// Inner objective at each chosen position.
    pub inner_values: Vec<f64>,
    /// Global grid minimum of the inner objective.
    pub inner_optimum: f64,
    /// Sum of quantile similarities of the chosen positions.
    pub middle_value: f64,
    /// Best middle value attainable per particle on the feasible set.
    pub middle_optimum_per_particle: f64,
    /// Largest pairwise similarity among the chosen positions.
    pub top_value: f64,
    pub feasible_count: usize,
    pub candidate_count: usize,
    pub grid_resolution: usize,
}

/// Three nested dense searches: feasible points of the inner objective,
/// then the per-particle quantile maximizers, then the particle set with
/// the smallest pairwise similarity, enumerated in index order.
pub fn solve_trilevel_toy(instance: &TrilevelInstance) -> Result<TrilevelSolution> {
    instance.validate()?;
    let grid = instance.grid_points();

    let inner: Vec<f64> = grid.iter().map(|p| instance.inner_objective(p)).collect();
    let inner_optimum = inner.iter().cloned().fold(f64::INFINITY, f64::min);
    let inner_tol = instance.inner_tolerance();
    if inner_optimum > inner_tol {
        return Err(DistillError::Resolution(format!(
            "grid cannot represent the circle: best inner value {inner_optimum} above tolerance {inner_tol}"
        )));
    }
    let feasible: Vec<usize> = (0..grid.len())
        .filter(|&i| inner[i] <= inner_optimum + inner_tol)
        .collect();
    if feasible.len() < instance.n_particles {
        return Err(DistillError::Resolution(format!(
            "only {} feasible grid points for {} particles",
            feasible.len(),
            instance.n_particles
        )));
    }

    let quantiles: Vec<f64> = feasible
        .iter()
        .map(|&i| quantile_similarity(&grid[i], &instance.samples, instance.q_tilde))
        .collect::<Result<_>>()?;
    let middle_best = quantiles.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let middle_tol = instance.middle_tolerance();
    let candidates: Vec<usize> = feasible
        .iter()
        .zip(&quantiles)
        .filter(|(_, &q)| q >= middle_best - middle_tol)
        .map(|(&i, _)| i)
        .collect();
    if candidates.len() < instance.n_particles {
        return Err(DistillError::Resolution(format!(
            "only {} middle-level candidates for {} particles",
            candidates.len(),
            instance.n_particles
        )));
    }

    // Top level: exhaustive enumeration over candidate combinations.
    let combos = combination_count(candidates.len(), instance.n_particles);
    if combos > 20_000_000 {
        return Err(DistillError::Resolution(format!(
            "top-level enumeration of {combos} combinations is too large; coarsen the middle tolerance or reduce particles"
        )));
    }
    let mut chosen: Option<(Vec<usize>, f64)> = None;
    let mut combo: Vec<usize> = (0..instance.n_particles).collect();
    loop {
        let value = max_pairwise_sim(&combo, &candidates, &grid)?;
        let better = match &chosen {
            None => true,
            Some((_, best)) => value < *best,
        };
        if better {
            chosen = Some((combo.clone(), value));
        }
        if !next_combination(&mut combo, candidates.len()) {
            break;
        }
    }
    let (combo, top_value) = chosen.expect("at least one combination");
    let positions: Vec<Vec<f64>> = combo.iter().map(|&c| grid[candidates[c]].clone()).collect();
    let inner_values: Vec<f64> = positions.iter().map(|p| instance.inner_objective(p)).collect();
    let middle_value = positions
        .iter()
        .map(|p| quantile_similarity(p, &instance.samples, instance.q_tilde))
        .sum::<Result<f64>>()?;

    Ok(TrilevelSolution {
        positions,
        inner_values,
        inner_optimum,
        middle_value,
        middle_optimum_per_particle: middle_best,
        top_value,
        feasible_count: feasible.len(),
        candidate_count: candidates.len(),
        grid_resolution: instance.grid_resolution,
    })
}

fn max_pairwise_sim(combo: &[usize], candidates: &[usize], grid: &[Vec<f64>]) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for a in 0..combo.len() {
        for b in a + 1..combo.len() {
            let s = cosine_sim(&grid[candidates[combo[a]]], &grid[candidates[combo[b]]])?;
            best = best.max(s);
        }
    }
    Ok(best)
}

fn combination_count(n: usize, k: usize) -> u128 {
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Advances `combo` to the next k-combination of `0..n`; false when done.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - (k - i) {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Builds the clustered-samples instance used in tests and demos: `count`
/// sample directions spread across `arc` radians centered at `angle`.
pub fn clustered_circle_samples(angle: f64, arc: f64, count: usize, radius: f64) -> Vec<Vec<f64>> {
    (0..count)
        .map(|i| {
            let a = if count == 1 {
                angle
            } else {
                angle - arc / 2.0 + arc * i as f64 / (count - 1) as f64
            };
            vec![radius * a.cos(), radius * a.sin()]
        })
        .collect()
}
