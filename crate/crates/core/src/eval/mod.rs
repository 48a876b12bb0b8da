//! Scoring of surrogate datasets: classifier protocol, distribution
//! metrics and report assembly.

pub mod classifier;
pub mod fid;
pub mod mmd;
pub mod prdc;
pub mod report;

pub use classifier::{train_eval_classifier, EvalProtocol, TestModel};
pub use fid::gaussian_fid;
pub use mmd::{mmd_rbf, Bandwidth};
pub use prdc::{prdc, Prdc, DEFAULT_PRDC_K};
pub use report::{build_report, MetricsReport};

use crate::dataset::LabeledDataset;
use crate::error::{DistillError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateOrigin {
    Selected,
    Generated,
}

/// A distilled dataset with its budget bookkeeping.
#[derive(Debug, Clone)]
pub struct SurrogateDataset {
    pub items: LabeledDataset,
    pub ipc: usize,
    pub origin: SurrogateOrigin,
    /// Hash of the config that produced it.
    pub provenance: String,
}

impl SurrogateDataset {
    pub fn new(
        items: LabeledDataset,
        ipc: usize,
        origin: SurrogateOrigin,
        provenance: String,
    ) -> Result<Self> {
        if ipc == 0 {
            return Err(DistillError::invalid("ipc must be positive"));
        }
        let expected = ipc * items.class_count;
        if items.len() != expected {
            return Err(DistillError::Validation(format!(
                "surrogate holds {} items, expected ipc {} x {} classes = {}",
                items.len(),
                ipc,
                items.class_count,
                expected
            )));
        }
        for class in 0..items.class_count {
            let count = items.labels.iter().filter(|&&l| l == class).count();
            if count != ipc {
                return Err(DistillError::Validation(format!(
                    "class {class} holds {count} items, expected {ipc}"
                )));
            }
        }
        Ok(SurrogateDataset {
            items,
            ipc,
            origin,
            provenance,
        })
    }
}
