//! Labeled vector datasets and feature sets.

use crate::error::{DistillError, Result};
use crate::vecmath::all_finite;

/// A labeled collection of d-dimensional vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub class_count: usize,
}

impl LabeledDataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(DistillError::invalid(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(DistillError::invalid(format!(
                "label {bad} outside class set of size {class_count}"
            )));
        }
        Ok(LabeledDataset {
            features,
            labels,
            class_count,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    /// Indices of every item of `class`, in storage order.
    pub fn class_indices(&self, class: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == class).collect()
    }
}

/// Feature matrix with labels and ids pointing back into the source dataset.
#[derive(Debug, Clone)]
pub struct FeatureSet {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub source_ids: Vec<usize>,
    pub class_count: usize,
}

impl FeatureSet {
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<usize>,
        source_ids: Vec<usize>,
        class_count: usize,
    ) -> Result<Self> {
        if features.is_empty() {
            return Err(DistillError::EmptyInput("feature set must be nonempty".into()));
        }
        if features.len() != labels.len() || features.len() != source_ids.len() {
            return Err(DistillError::invalid("features/labels/ids length mismatch"));
        }
        let dim = features[0].len();
        for (i, row) in features.iter().enumerate() {
            if row.len() != dim {
                return Err(DistillError::invalid(format!("row {i} has dim {}", row.len())));
            }
            if !all_finite(row) {
                return Err(DistillError::invalid(format!("row {i} contains non-finite values")));
            }
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(DistillError::invalid(format!(
                "label {bad} outside class set of size {class_count}"
            )));
        }
        Ok(FeatureSet {
            features,
            labels,
            source_ids,
            class_count,
        })
    }

    /// Wraps a dataset as a feature set with identity source ids.
    pub fn from_dataset(ds: &LabeledDataset) -> Result<Self> {
        FeatureSet::new(
            ds.features.clone(),
            ds.labels.clone(),
            (0..ds.len()).collect(),
            ds.class_count,
        )
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn class_indices(&self, class: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == class).collect()
    }
}
