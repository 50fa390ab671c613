use nalgebra::DMatrix;

use super::policy::{LossWeights, ManagerNet};
use crate::error::{Error, Result};
use crate::sim::{LowerBodyCommand, RolloutBatch, STATE_DIM};

/// Append-only store of `(state, expert label)` pairs in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AggregatedDataset {
    states: Vec<[f64; STATE_DIM]>,
    labels: Vec<LowerBodyCommand>,
    events: usize,
}

impl AggregatedDataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of [`aggregate`](Self::aggregate) calls so far.
    pub fn events(&self) -> usize {
        self.events
    }

    /// Appends every record of `batch` verbatim; returns how many were added.
    pub fn aggregate(&mut self, batch: &RolloutBatch) -> usize {
        self.states.extend(batch.records.iter().map(|r| r.state.features()));
        self.labels.extend(batch.records.iter().map(|r| r.label));
        self.events += 1;
        batch.len()
    }

    pub fn labels(&self) -> &[LowerBodyCommand] {
        &self.labels
    }

    pub fn state(&self, i: usize) -> &[f64; STATE_DIM] {
        &self.states[i]
    }

    /// Feature matrix (one column per pair) and labels for `indices`.
    pub fn gather(&self, indices: &[usize]) -> (DMatrix<f64>, Vec<LowerBodyCommand>) {
        let mut x = DMatrix::zeros(STATE_DIM, indices.len());
        for (c, &i) in indices.iter().enumerate() {
            x.column_mut(c).copy_from_slice(&self.states[i]);
        }
        (x, indices.iter().map(|&i| self.labels[i]).collect())
    }
}

/// Mean command loss of `manager` over the whole dataset.
pub fn da_loss(manager: &ManagerNet, data: &AggregatedDataset, weights: &LossWeights) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyInput("aggregated dataset is empty"));
    }
    const CHUNK: usize = 4096;
    let mut total = 0.0;
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(CHUNK) {
        let (x, labels) = data.gather(chunk);
        let preds = manager.predict_batch(&x)?;
        total += preds.iter().zip(&labels).map(|(o, t)| weights.pair_loss(o, t)).sum::<f64>();
    }
    Ok(total / data.len() as f64)
}
