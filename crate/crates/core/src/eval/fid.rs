//! Feature-space Fréchet distance between two sample clouds.

use crate::dataset::FeatureSet;
use crate::error::{DistillError, Result};
use crate::linalg::{covariance, mean_vector, sqrtm_psd, Mat};
use crate::vecmath::squared_distance;

/// `||mu_r - mu_g||^2 + tr(S_r + S_g - 2 (S_r S_g)^{1/2})` on the given
/// features. Falls back to diagonal covariances when either set is too
/// small for a stable full covariance (fewer than d+1 points).
pub fn gaussian_fid(real: &FeatureSet, gen: &FeatureSet) -> Result<f64> {
    if real.dim() != gen.dim() {
        return Err(DistillError::invalid(format!(
            "dimension mismatch: {} vs {}",
            real.dim(),
            gen.dim()
        )));
    }
    let d = real.dim();
    let mu_r = mean_vector(&real.features);
    let mu_g = mean_vector(&gen.features);
    let mean_term = squared_distance(&mu_r, &mu_g);

    let full_rank_ok = real.len() >= d + 1 && gen.len() >= d + 1;
    let value = if full_rank_ok {
        let s_r = covariance(&real.features);
        let s_g = covariance(&gen.features);
        if !s_r.data.iter().all(|v| v.is_finite()) || !s_g.data.iter().all(|v| v.is_finite()) {
            return Err(DistillError::numeric("non-finite covariance"));
        }
        let cross_trace = trace_sqrt_product(&s_r, &s_g)?;
        mean_term + s_r.trace() + s_g.trace() - 2.0 * cross_trace
    } else {
        let var = |rows: &[Vec<f64>]| -> Vec<f64> {
            let mu = mean_vector(rows);
            let denom = if rows.len() > 1 { (rows.len() - 1) as f64 } else { 1.0 };
            (0..d)
                .map(|i| rows.iter().map(|r| (r[i] - mu[i]).powi(2)).sum::<f64>() / denom)
                .collect()
        };
        let vr = var(&real.features);
        let vg = var(&gen.features);
        mean_term
            + vr.iter()
                .zip(&vg)
                .map(|(a, b)| a + b - 2.0 * (a * b).sqrt())
                .sum::<f64>()
    };
    if !value.is_finite() {
        return Err(DistillError::numeric("non-finite Fréchet distance"));
    }
    // Rounding can leave a tiny negative residue on moment-matched sets.
    Ok(value.max(0.0))
}

/// `tr((A B)^{1/2})` for symmetric PSD A, B via the Denman-Beavers square
/// root of the (similar-to-PSD) product. A tiny ridge retry covers nearly
/// singular inputs.
fn trace_sqrt_product(a: &Mat, b: &Mat) -> Result<f64> {
    let product = a.matmul(b);
    match sqrtm_psd(&product) {
        Ok(s) => Ok(s.trace()),
        Err(_) => {
            let mut ridged = product;
            let bump = 1e-12 * (1.0 + ridged.max_abs());
            for i in 0..ridged.n {
                *ridged.at_mut(i, i) += bump;
            }
            Ok(sqrtm_psd(&ridged)?.trace())
        }
    }
}
