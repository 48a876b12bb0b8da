//! Desk-scale dataset distillation toolkit.
//!
//! The crate covers the full loop: a small class-conditional diffusion
//! model with minimax fine-tuning criteria over FIFO memory banks, coreset
//! selection baselines, distribution-fidelity metrics for scoring surrogate
//! datasets, and a stochastic-control simulator that checks the theory on
//! analytic Gaussian-mixture targets.

pub mod archive;
pub mod checkpoint;
pub mod control;
pub mod coreset;
pub mod dataset;
pub mod diffusion;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod minimax;
pub mod nn;
pub mod rng;
pub mod vecmath;

pub use dataset::{FeatureSet, LabeledDataset};
pub use error::{DistillError, Result};
pub use eval::{MetricsReport, SurrogateDataset, SurrogateOrigin};
pub use minimax::{MemoryBank, MinimaxConfig};
pub use vecmath::cosine_sim;
