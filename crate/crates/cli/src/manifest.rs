//! Experiment manifest: every artifact on disk is reachable from here.

use distillkit::error::{DistillError, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellRecord {
    pub method: String,
    pub ipc: usize,
    /// Paths relative to the experiment directory.
    pub artifacts: Vec<String>,
    pub wall_ms: f64,
    pub complete: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct Manifest {
    pub name: String,
    pub config_hash: String,
    pub base_seed: u64,
    pub distill_cells: Vec<CellRecord>,
    pub eval_artifacts: Vec<String>,
    pub eval_wall_ms: f64,
    pub plot_artifacts: Vec<String>,
    pub control_artifacts: Vec<String>,
}

impl Manifest {
    pub fn new(name: &str, config_hash: &str, base_seed: u64) -> Self {
        Manifest {
            name: name.to_string(),
            config_hash: config_hash.to_string(),
            base_seed,
            ..Default::default()
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| DistillError::invalid(format!("manifest encode: {e}")))?;
        std::fs::write(dir.join("manifest.json"), text)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join("manifest.json"))?;
        serde_json::from_str(&text)
            .map_err(|e| DistillError::invalid(format!("manifest decode: {e}")))
    }

    /// All recorded artifact paths, relative to the experiment directory.
    pub fn all_artifacts(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for c in &self.distill_cells {
            out.extend(c.artifacts.iter().map(String::as_str));
        }
        out.extend(self.eval_artifacts.iter().map(String::as_str));
        out.extend(self.plot_artifacts.iter().map(String::as_str));
        out.extend(self.control_artifacts.iter().map(String::as_str));
        out
    }
}
