//! Model checkpoint persistence.
//!
//! A checkpoint is a named-array archive: one array per layer plus the
//! class table, with a JSON header carrying the dimension, schedule kind,
//! step count, class count and sampling/recovery mode flags.

use crate::archive::Archive;
use crate::diffusion::{Denoiser, SamplerKind, ScheduleKind, ZhatMode};
use crate::error::{DistillError, Result};
use crate::nn::Activation;
use std::path::Path;

#[derive(Debug, Clone)]
pub struct DiffusionCheckpoint {
    pub model: Denoiser,
    pub schedule_kind: ScheduleKind,
    pub timesteps: usize,
    pub zhat_mode: ZhatMode,
    pub sampler: SamplerKind,
}

impl DiffusionCheckpoint {
    pub fn to_archive(&self) -> Result<Archive> {
        let m = &self.model;
        let meta = serde_json::json!({
            "dimension": m.dim,
            "schedule_kind": self.schedule_kind,
            "timesteps": self.timesteps,
            "class_count": m.class_count,
            "class_embed_dim": m.class_embed_dim,
            "time_feat_dim": m.time_feat_dim,
            "hidden": m.hidden_sizes(),
            "zhat_mode": self.zhat_mode,
            "sampler": self.sampler,
        });
        let mut archive = Archive::new(meta);
        archive.push(
            "class_embed",
            vec![m.class_count, m.class_embed_dim],
            m.class_embed.clone(),
        )?;
        for (i, (w, b)) in m.mlp.weights.iter().zip(&m.mlp.biases).enumerate() {
            let (n_in, n_out) = (m.mlp.sizes[i], m.mlp.sizes[i + 1]);
            archive.push(&format!("w{i}"), vec![n_out, n_in], w.clone())?;
            archive.push(&format!("b{i}"), vec![n_out], b.clone())?;
        }
        Ok(archive)
    }

    pub fn from_archive(archive: &Archive) -> Result<Self> {
        let meta = &archive.meta;
        let field = |name: &str| -> Result<&serde_json::Value> {
            meta.get(name)
                .ok_or_else(|| DistillError::Archive(format!("checkpoint header missing {name}")))
        };
        let dim = field("dimension")?.as_u64().unwrap_or(0) as usize;
        let class_count = field("class_count")?.as_u64().unwrap_or(0) as usize;
        let class_embed_dim = field("class_embed_dim")?.as_u64().unwrap_or(0) as usize;
        let time_feat_dim = field("time_feat_dim")?.as_u64().unwrap_or(0) as usize;
        let timesteps = field("timesteps")?.as_u64().unwrap_or(0) as usize;
        let hidden: Vec<usize> = serde_json::from_value(field("hidden")?.clone())
            .map_err(|e| DistillError::Archive(format!("bad hidden sizes: {e}")))?;
        let schedule_kind: ScheduleKind = serde_json::from_value(field("schedule_kind")?.clone())
            .map_err(|e| DistillError::Archive(format!("bad schedule kind: {e}")))?;
        let zhat_mode: ZhatMode = serde_json::from_value(field("zhat_mode")?.clone())
            .map_err(|e| DistillError::Archive(format!("bad zhat mode: {e}")))?;
        let sampler: SamplerKind = serde_json::from_value(field("sampler")?.clone())
            .map_err(|e| DistillError::Archive(format!("bad sampler kind: {e}")))?;

        // Rebuild with a throwaway init, then overwrite every parameter.
        let mut rng = crate::rng::rng_from_seed(0);
        let mut model = Denoiser::init(
            dim,
            class_count,
            class_embed_dim,
            time_feat_dim,
            &hidden,
            Activation::Tanh,
            &mut rng,
        );
        let (_, class_embed) = archive.get("class_embed")?;
        model.class_embed.copy_from_slice(class_embed);
        for i in 0..model.mlp.layer_count() {
            let (_, w) = archive.get(&format!("w{i}"))?;
            let (_, b) = archive.get(&format!("b{i}"))?;
            if w.len() != model.mlp.weights[i].len() || b.len() != model.mlp.biases[i].len() {
                return Err(DistillError::Archive(format!("layer {i} size mismatch")));
            }
            model.mlp.weights[i].copy_from_slice(w);
            model.mlp.biases[i].copy_from_slice(b);
        }
        Ok(DiffusionCheckpoint {
            model,
            schedule_kind,
            timesteps,
            zhat_mode,
            sampler,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_archive()?.save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_archive(&Archive::load(path)?)
    }
}
