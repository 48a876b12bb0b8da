//! k-nearest-neighbor manifold metrics: precision, recall, density, coverage.

use crate::dataset::FeatureSet;
use crate::error::{DistillError, Result};
use crate::vecmath::distance;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prdc {
    /// Percent of generated points inside some real point's k-NN ball.
    pub precision: f64,
    /// Percent of real points inside some generated point's k-NN ball.
    pub recall: f64,
    /// Mean number of covering real balls per generated point, over k.
    pub density: f64,
    /// Percent of real points whose own k-NN ball contains a generated point.
    pub coverage: f64,
}

pub const DEFAULT_PRDC_K: usize = 5;

/// Distance from each point to its k-th nearest neighbor within `rows`.
fn knn_radii(rows: &[Vec<f64>], k: usize) -> Vec<f64> {
    let n = rows.len();
    let mut radii = Vec::with_capacity(n);
    for i in 0..n {
        let mut dists: Vec<f64> = (0..n)
            .filter(|&j| j != i)
            .map(|j| distance(&rows[i], &rows[j]))
            .collect();
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        radii.push(dists[k - 1]);
    }
    radii
}

pub fn prdc(real: &FeatureSet, gen: &FeatureSet, k: usize) -> Result<Prdc> {
    if k == 0 {
        return Err(DistillError::invalid("k must be positive"));
    }
    if real.dim() != gen.dim() {
        return Err(DistillError::invalid(format!(
            "dimension mismatch: {} vs {}",
            real.dim(),
            gen.dim()
        )));
    }
    if real.len() <= k || gen.len() <= k {
        return Err(DistillError::InsufficientData(format!(
            "need more than k={k} points per set, got {} and {}",
            real.len(),
            gen.len()
        )));
    }
    let real_radii = knn_radii(&real.features, k);
    let gen_radii = knn_radii(&gen.features, k);
    let (n, m) = (real.len(), gen.len());

    let mut precision_hits = 0usize;
    let mut density_hits = 0usize;
    for g in &gen.features {
        let mut inside_any = false;
        for (r, radius) in real.features.iter().zip(&real_radii) {
            if distance(g, r) <= *radius {
                inside_any = true;
                density_hits += 1;
            }
        }
        if inside_any {
            precision_hits += 1;
        }
    }
    let mut recall_hits = 0usize;
    let mut coverage_hits = 0usize;
    for (r, r_radius) in real.features.iter().zip(&real_radii) {
        if gen
            .features
            .iter()
            .zip(&gen_radii)
            .any(|(g, gr)| distance(r, g) <= *gr)
        {
            recall_hits += 1;
        }
        if gen.features.iter().any(|g| distance(r, g) <= *r_radius) {
            coverage_hits += 1;
        }
    }
    Ok(Prdc {
        precision: 100.0 * precision_hits as f64 / m as f64,
        recall: 100.0 * recall_hits as f64 / n as f64,
        density: density_hits as f64 / (k * m) as f64,
        coverage: 100.0 * coverage_hits as f64 / n as f64,
    })
}
