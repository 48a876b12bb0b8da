//! Stochastic-control view of generation: particle simulation under a
//! transport drift, path and terminal cost functionals, and the toy
//! lexicographic three-level solver.

pub mod costs;
pub mod mixture;
pub mod sde;
pub mod trilevel;

pub use costs::{diversity_terminal_cost, quantile_similarity, repr_path_cost, scalarized_objective};
pub use mixture::{follmer_drift, GaussianMixture};
pub use sde::{cost_to_go_estimate, simulate_sde, CostEstimate, SdeOptions, TrajectoryBundle};
pub use trilevel::{clustered_circle_samples, solve_trilevel_toy, TrilevelInstance, TrilevelSolution};

use crate::archive::Archive;
use crate::error::{DistillError, Result};

impl TrajectoryBundle {
    pub fn to_archive(&self) -> Result<Archive> {
        let n = self.n_particles();
        let steps = self.steps();
        let dim = if n > 0 { self.states[0][0].len() } else { 0 };
        let meta = serde_json::json!({
            "particles": n,
            "steps": steps,
            "dim": dim,
            "seed": self.seed,
        });
        let mut archive = Archive::new(meta);
        let mut states = Vec::with_capacity(n * (steps + 1) * dim);
        for p in &self.states {
            for s in p {
                states.extend_from_slice(s);
            }
        }
        archive.push("states", vec![n, steps + 1, dim], states)?;
        let mut drifts = Vec::with_capacity(n * steps * dim);
        for p in &self.drifts {
            for u in p {
                drifts.extend_from_slice(u);
            }
        }
        archive.push("drifts", vec![n, steps, dim], drifts)?;
        archive.push("times", vec![steps + 1], self.times.clone())?;
        Ok(archive)
    }

    pub fn from_archive(archive: &Archive) -> Result<Self> {
        let (sshape, states_flat) = archive.get("states")?;
        if sshape.len() != 3 {
            return Err(DistillError::Archive("states must be rank 3".into()));
        }
        let (n, nodes, dim) = (sshape[0], sshape[1], sshape[2]);
        let (_, drifts_flat) = archive.get("drifts")?;
        let (_, times) = archive.get("times")?;
        let steps = nodes - 1;
        let mut states = Vec::with_capacity(n);
        let mut drifts = Vec::with_capacity(n);
        for p in 0..n {
            let mut path = Vec::with_capacity(nodes);
            for k in 0..nodes {
                let base = (p * nodes + k) * dim;
                path.push(states_flat[base..base + dim].to_vec());
            }
            states.push(path);
            let mut row = Vec::with_capacity(steps);
            for k in 0..steps {
                let base = (p * steps + k) * dim;
                row.push(drifts_flat[base..base + dim].to_vec());
            }
            drifts.push(row);
        }
        let seed = archive.meta["seed"].as_u64().unwrap_or(0);
        Ok(TrajectoryBundle {
            states,
            drifts,
            times: times.to_vec(),
            seed,
        })
    }
}
