//! Experiment configuration: TOML on disk, strict parsing, content hash.

use distillkit::error::{DistillError, Result};
use distillkit::eval::EvalProtocol;
use distillkit::minimax::MinimaxConfig;
use distillkit::diffusion::{SamplerKind, ScheduleKind};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Random,
    Herding,
    Kcenter,
    DiffusionBase,
    DiffusionMinimax,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Random => "random",
            Method::Herding => "herding",
            Method::Kcenter => "kcenter",
            Method::DiffusionBase => "diffusion_base",
            Method::DiffusionMinimax => "diffusion_minimax",
        }
    }

    pub fn is_diffusion(&self) -> bool {
        matches!(self, Method::DiffusionBase | Method::DiffusionMinimax)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// Per-class ring-of-modes Gaussian mixtures in the plane.
    Synthetic {
        classes: usize,
        per_class: usize,
        #[serde(default = "default_modes")]
        modes_per_class: usize,
        /// Distance of class centers from the origin (0 puts every class
        /// at the origin).
        #[serde(default = "default_class_radius")]
        class_radius: f64,
        /// Radius of the mode ring around each class center.
        #[serde(default = "default_mode_spread")]
        mode_spread: f64,
        #[serde(default = "default_noise_sigma")]
        noise_sigma: f64,
    },
    /// Directory of class subdirectories of raster images.
    ImageFolder {
        path: String,
        #[serde(default = "default_resolution")]
        resolution: usize,
        #[serde(default = "default_channels")]
        channels: usize,
    },
}

fn default_modes() -> usize {
    1
}
fn default_class_radius() -> f64 {
    4.0
}
fn default_mode_spread() -> f64 {
    0.0
}
fn default_noise_sigma() -> f64 {
    0.3
}
fn default_resolution() -> usize {
    16
}
fn default_channels() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffusionSpec {
    pub timesteps: usize,
    pub schedule: ScheduleKind,
    pub sample_steps: usize,
    pub sampler: SamplerKind,
    pub hidden: Vec<usize>,
    pub class_embed_dim: usize,
    pub time_feat_dim: usize,
    pub pretrain_epochs: usize,
    pub pretrain_learning_rate: f64,
    pub pretrain_batch_size: usize,
}

impl Default for DiffusionSpec {
    fn default() -> Self {
        DiffusionSpec {
            timesteps: 1000,
            schedule: ScheduleKind::Linear,
            sample_steps: 50,
            sampler: SamplerKind::Deterministic,
            hidden: vec![48, 48],
            class_embed_dim: 8,
            time_feat_dim: 8,
            pretrain_epochs: 30,
            pretrain_learning_rate: 1e-3,
            pretrain_batch_size: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extractor {
    /// Raw features (the synthetic-data default).
    Identity,
    /// GAP features of a small conv net trained on the full dataset.
    Conv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSpec {
    pub protocol: EvalProtocol,
    pub prdc_k: usize,
    /// Held-out test draws per class (synthetic datasets).
    pub test_per_class: usize,
    pub extractor: Extractor,
}

impl Default for EvalSpec {
    fn default() -> Self {
        EvalSpec {
            protocol: EvalProtocol::default(),
            prdc_k: 5,
            test_per_class: 100,
            extractor: Extractor::Identity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrilevelSpec {
    pub samples_angle: f64,
    pub samples_arc: f64,
    pub samples_count: usize,
    pub radius: f64,
    pub grid_resolution: usize,
    pub grid_extent: f64,
    pub particles: usize,
    pub q_tilde: f64,
}

impl Default for TrilevelSpec {
    fn default() -> Self {
        TrilevelSpec {
            samples_angle: 0.0,
            samples_arc: 0.5,
            samples_count: 11,
            radius: 1.0,
            grid_resolution: 81,
            grid_extent: 1.5,
            particles: 2,
            q_tilde: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlSpec {
    /// Target mixture (identity covariance).
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub particles: usize,
    pub steps: usize,
    pub q_tilde: f64,
    pub trilevel: TrilevelSpec,
}

impl Default for ControlSpec {
    fn default() -> Self {
        ControlSpec {
            weights: vec![0.5, 0.5],
            means: vec![vec![-2.0], vec![2.0]],
            particles: 10_000,
            steps: 1000,
            q_tilde: 0.02,
            trilevel: TrilevelSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub methods: Vec<Method>,
    pub ipc: Vec<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub base_seed: u64,
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub diffusion: DiffusionSpec,
    #[serde(default)]
    pub minimax: MinimaxConfig,
    #[serde(default)]
    pub eval: EvalSpec,
    #[serde(default)]
    pub control: ControlSpec,
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return Err(DistillError::invalid(
                "config error on key \"name\": must be nonempty [A-Za-z0-9_-]",
            ));
        }
        if self.methods.is_empty() {
            return Err(DistillError::invalid("config error on key \"methods\": empty"));
        }
        let mut seen = Vec::new();
        for m in &self.methods {
            if seen.contains(m) {
                return Err(DistillError::invalid(format!(
                    "config error on key \"methods\": duplicate {}",
                    m.as_str()
                )));
            }
            seen.push(*m);
        }
        if self.ipc.is_empty() || self.ipc.iter().any(|&v| v == 0) {
            return Err(DistillError::invalid(
                "config error on key \"ipc\": values must be positive",
            ));
        }
        if self.seeds.is_empty() {
            return Err(DistillError::invalid("config error on key \"seeds\": empty"));
        }
        match &self.dataset {
            DatasetSpec::Synthetic {
                classes,
                per_class,
                modes_per_class,
                noise_sigma,
                ..
            } => {
                if *classes == 0 || *per_class == 0 {
                    return Err(DistillError::invalid(
                        "config error on key \"dataset\": classes and per_class must be positive",
                    ));
                }
                if *modes_per_class == 0 || !(*noise_sigma > 0.0) {
                    return Err(DistillError::invalid(
                        "config error on key \"dataset\": degenerate mixture",
                    ));
                }
            }
            DatasetSpec::ImageFolder {
                path,
                resolution,
                channels,
            } => {
                if path.is_empty() {
                    return Err(DistillError::invalid("config error on key \"dataset.path\": empty"));
                }
                if *resolution == 0 || *resolution % 8 != 0 {
                    return Err(DistillError::invalid(
                        "config error on key \"dataset.resolution\": must be a positive multiple of 8",
                    ));
                }
                if !matches!(channels, 1 | 3) {
                    return Err(DistillError::invalid(
                        "config error on key \"dataset.channels\": must be 1 or 3",
                    ));
                }
            }
        }
        if self.diffusion.timesteps == 0
            || self.diffusion.sample_steps == 0
            || self.diffusion.sample_steps > self.diffusion.timesteps
        {
            return Err(DistillError::invalid(
                "config error on key \"diffusion\": sample_steps must lie in 1..=timesteps",
            ));
        }
        if self.diffusion.time_feat_dim % 2 != 0 {
            return Err(DistillError::invalid(
                "config error on key \"diffusion.time_feat_dim\": must be even",
            ));
        }
        self.minimax
            .validate()
            .map_err(|e| DistillError::invalid(format!("config error on key \"minimax\": {e}")))?;
        self.eval
            .protocol
            .validate()
            .map_err(|e| DistillError::invalid(format!("config error on key \"eval.protocol\": {e}")))?;
        if self.eval.prdc_k == 0 {
            return Err(DistillError::invalid(
                "config error on key \"eval.prdc_k\": must be positive",
            ));
        }
        if self.control.weights.len() != self.control.means.len()
            || self.control.weights.is_empty()
        {
            return Err(DistillError::invalid(
                "config error on key \"control\": weights/means mismatch",
            ));
        }
        Ok(())
    }

    /// Canonical serialization: the parsed struct re-emitted as TOML, so
    /// defaults are materialized and key order is fixed.
    pub fn canonical_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn config_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.canonical_toml().as_bytes());
        hex_string(&hasher.finalize())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.canonical_toml())?;
        Ok(())
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Parses, fills defaults and validates. Unknown keys are errors.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| DistillError::invalid(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig =
        toml::from_str(text).map_err(|e| DistillError::invalid(format!("config error: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Deterministic seed mixing for per-cell substreams.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut acc: u64 = 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        let mut x = acc ^ p.wrapping_mul(0xBF58_476D_1CE4_E5B9);
        x ^= x >> 30;
        x = x.wrapping_mul(0x94D0_49BB_1331_11EB);
        x ^= x >> 27;
        acc = x;
    }
    acc
}
