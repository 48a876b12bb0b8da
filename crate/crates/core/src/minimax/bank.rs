//! Bounded FIFO embedding queues.

use crate::error::{DistillError, Result};
use crate::vecmath::all_finite;
use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partitioning {
    /// One queue per class; lookups see only the matching class.
    PerClass,
    /// A single queue; lookups see everything.
    Global,
}

/// FIFO memory of embedding snapshots from adjacent steps.
///
/// Entries are plain value copies: once stored they never change, whatever
/// happens to the model that produced them.
#[derive(Debug, Clone)]
pub struct MemoryBank {
    pub capacity: usize,
    pub class_count: usize,
    pub partitioning: Partitioning,
    queues: Vec<VecDeque<Vec<f64>>>,
}

impl MemoryBank {
    pub fn new(capacity: usize, class_count: usize, partitioning: Partitioning) -> Result<Self> {
        if capacity == 0 {
            return Err(DistillError::invalid("bank capacity must be positive"));
        }
        if class_count == 0 {
            return Err(DistillError::invalid("class count must be positive"));
        }
        let n_queues = match partitioning {
            Partitioning::PerClass => class_count,
            Partitioning::Global => 1,
        };
        Ok(MemoryBank {
            capacity,
            class_count,
            partitioning,
            queues: vec![VecDeque::new(); n_queues],
        })
    }

    fn queue_for(&self, label: usize) -> usize {
        match self.partitioning {
            Partitioning::PerClass => label,
            Partitioning::Global => 0,
        }
    }

    pub fn enqueue(&mut self, embedding: Vec<f64>, label: usize) -> Result<()> {
        if label >= self.class_count {
            return Err(DistillError::invalid(format!(
                "label {label} outside class set of size {}",
                self.class_count
            )));
        }
        if !all_finite(&embedding) {
            return Err(DistillError::invalid("embedding contains non-finite values"));
        }
        let idx = self.queue_for(label);
        let q = &mut self.queues[idx];
        q.push_back(embedding);
        while q.len() > self.capacity {
            q.pop_front();
        }
        Ok(())
    }

    /// Entries visible to a lookup for `label`, oldest first.
    pub fn entries(&self, label: usize) -> impl Iterator<Item = &Vec<f64>> {
        self.queues[self.queue_for(label)].iter()
    }

    pub fn len_for(&self, label: usize) -> usize {
        self.queues[self.queue_for(label)].len()
    }

    pub fn total_len(&self) -> usize {
        self.queues.iter().map(VecDeque::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total_len() == 0
    }
}

/// Appends a batch in order; FIFO eviction beyond capacity.
pub fn bank_enqueue(bank: &mut MemoryBank, embeddings: &[Vec<f64>], labels: &[usize]) -> Result<()> {
    if embeddings.len() != labels.len() {
        return Err(DistillError::invalid("embeddings/labels length mismatch"));
    }
    for (e, &l) in embeddings.iter().zip(labels) {
        bank.enqueue(e.clone(), l)?;
    }
    Ok(())
}
