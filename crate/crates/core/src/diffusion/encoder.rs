//! Embedding encoders.
//!
//! The identity encoder passes raw vectors through unchanged. The linear
//! variant projects onto a seeded orthonormal basis; its decode is the
//! transpose, a left inverse of the projection.

use crate::error::{DistillError, Result};
use crate::rng::{rng_from_seed, standard_normal_vec};
use crate::vecmath::dot;

#[derive(Debug, Clone)]
pub enum EncoderDecoder {
    Identity,
    /// Row-orthonormal `target_dim x input_dim` projection.
    LinearProjection {
        input_dim: usize,
        target_dim: usize,
        rows: Vec<Vec<f64>>,
    },
}

impl EncoderDecoder {
    pub fn identity() -> Self {
        EncoderDecoder::Identity
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, EncoderDecoder::Identity)
    }

    /// Orthonormal rows built by Gram-Schmidt over seeded Gaussian draws.
    pub fn linear_projection(input_dim: usize, target_dim: usize, seed: u64) -> Result<Self> {
        if target_dim == 0 || target_dim > input_dim {
            return Err(DistillError::invalid(format!(
                "target dim {target_dim} out of range 1..={input_dim}"
            )));
        }
        let mut rng = rng_from_seed(seed);
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(target_dim);
        while rows.len() < target_dim {
            let mut v = standard_normal_vec(&mut rng, input_dim);
            for r in &rows {
                let proj = dot(&v, r);
                for (vi, ri) in v.iter_mut().zip(r) {
                    *vi -= proj * ri;
                }
            }
            let n = dot(&v, &v).sqrt();
            if n > 1e-8 {
                for vi in &mut v {
                    *vi /= n;
                }
                rows.push(v);
            }
        }
        Ok(EncoderDecoder::LinearProjection {
            input_dim,
            target_dim,
            rows,
        })
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            EncoderDecoder::Identity => Ok(x.to_vec()),
            EncoderDecoder::LinearProjection {
                input_dim, rows, ..
            } => {
                if x.len() != *input_dim {
                    return Err(DistillError::invalid(format!(
                        "expected input dim {input_dim}, got {}",
                        x.len()
                    )));
                }
                Ok(rows.iter().map(|r| dot(r, x)).collect())
            }
        }
    }

    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        match self {
            EncoderDecoder::Identity => Ok(z.to_vec()),
            EncoderDecoder::LinearProjection {
                input_dim,
                target_dim,
                rows,
            } => {
                if z.len() != *target_dim {
                    return Err(DistillError::invalid(format!(
                        "expected embedding dim {target_dim}, got {}",
                        z.len()
                    )));
                }
                let mut out = vec![0.0; *input_dim];
                for (r, &zi) in rows.iter().zip(z) {
                    for (oi, ri) in out.iter_mut().zip(r) {
                        *oi += zi * ri;
                    }
                }
                Ok(out)
            }
        }
    }

    pub fn embedding_dim(&self, input_dim: usize) -> usize {
        match self {
            EncoderDecoder::Identity => input_dim,
            EncoderDecoder::LinearProjection { target_dim, .. } => *target_dim,
        }
    }
}
