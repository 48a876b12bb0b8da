//! Small vector helpers used throughout the crate.
//!
//! Embeddings are plain `Vec<f64>` / `&[f64]`; batches are slices of rows.
//! Everything here is desk-scale, so clarity wins over blocking or SIMD.

use crate::error::{DistillError, Result};

/// Norm floor used when normalizing directions.
pub const EPS_NORM: f64 = 1e-8;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

pub fn check_same_dim(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(DistillError::invalid(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Cosine similarity with norm floor `EPS_NORM`, clamped to [-1, 1].
pub fn cosine_sim(a: &[f64], b: &[f64]) -> Result<f64> {
    check_same_dim(a, b)?;
    let denom = norm(a).max(EPS_NORM) * norm(b).max(EPS_NORM);
    Ok((dot(a, b) / denom).clamp(-1.0, 1.0))
}

/// Gradient of `cosine_sim(a, b)` with respect to `a`, with `b` held fixed.
///
/// When the norm floor is active for `a` the denominator no longer depends
/// on `a` through its norm, and the corresponding term drops out.
pub fn cosine_sim_grad_wrt_a(a: &[f64], b: &[f64]) -> Vec<f64> {
    let na = norm(a);
    let nb = norm(b).max(EPS_NORM);
    let na_c = na.max(EPS_NORM);
    let d = dot(a, b);
    let mut g = vec![0.0; a.len()];
    for i in 0..a.len() {
        g[i] = b[i] / (na_c * nb);
        if na > EPS_NORM {
            g[i] -= d * a[i] / (na_c * na_c * na_c * nb);
        }
    }
    g
}

pub fn mean_rows(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    if rows.is_empty() {
        return Err(DistillError::EmptyInput("mean of empty batch".into()));
    }
    let dim = rows[0].len();
    let mut m = vec![0.0; dim];
    for r in rows {
        for (mi, v) in m.iter_mut().zip(r) {
            *mi += v;
        }
    }
    let n = rows.len() as f64;
    for mi in &mut m {
        *mi /= n;
    }
    Ok(m)
}

/// log(sum(exp(x))) with the usual max shift.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m.is_infinite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn all_finite(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite())
}
