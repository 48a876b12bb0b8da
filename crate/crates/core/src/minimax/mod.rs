//! Minimax fine-tuning: memory banks, the bank-extremum criteria and the
//! training loop that combines them with the plain diffusion loss.

pub mod bank;
pub mod finetune;
pub mod losses;

pub use bank::{bank_enqueue, MemoryBank, Partitioning};
pub use finetune::{finetune, step_loss_and_grad, BatchItem, FinetuneOutput, StepEval, TraceRow};
pub use losses::{
    div_loss, div_term, max_sim_entry, min_sim_entry, repr_loss, repr_loss_naive, repr_naive_term,
    repr_term, total_loss, TermEval,
};

use crate::diffusion::ZhatMode;
use crate::error::{DistillError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReprMode {
    Off,
    /// Align with the real mini-batch center.
    Naive,
    /// Pull toward the least-similar bank entry.
    Minimax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivMode {
    Off,
    /// Push away from the most-similar bank entry.
    Minimax,
}

/// Fine-tuning hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimaxConfig {
    pub lambda_r: f64,
    pub lambda_d: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub memory_capacity: usize,
    pub repr_mode: ReprMode,
    pub div_mode: DivMode,
    pub partitioning: Partitioning,
    pub zhat_mode: ZhatMode,
}

impl Default for MinimaxConfig {
    fn default() -> Self {
        MinimaxConfig {
            lambda_r: 0.002,
            lambda_d: 0.008,
            batch_size: 8,
            epochs: 8,
            learning_rate: 1e-3,
            weight_decay: 0.01,
            memory_capacity: 64,
            repr_mode: ReprMode::Minimax,
            div_mode: DivMode::Minimax,
            partitioning: Partitioning::PerClass,
            zhat_mode: ZhatMode::PaperLiteral,
        }
    }
}

impl MinimaxConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_r < 0.0 || self.lambda_d < 0.0 {
            return Err(DistillError::invalid("lambda weights must be nonnegative"));
        }
        // epochs may be zero: that is the documented no-op fine-tune.
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("memory_capacity", self.memory_capacity),
        ] {
            if v == 0 {
                return Err(DistillError::invalid(format!("{name} must be strictly positive")));
            }
        }
        if !(self.learning_rate > 0.0) {
            return Err(DistillError::invalid("learning_rate must be strictly positive"));
        }
        if self.weight_decay < 0.0 {
            return Err(DistillError::invalid("weight_decay must be nonnegative"));
        }
        Ok(())
    }
}
