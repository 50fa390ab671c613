use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::chunk::ActionChunk;
use crate::error::{Error, Result};

/// `tau * a + (1 - tau) * eps`, elementwise.
pub fn noised_chunk(a: &ActionChunk, eps: &ActionChunk, tau: f64) -> Result<ActionChunk> {
    if a.action_dim() != eps.action_dim() {
        return Err(Error::DimensionMismatch {
            expected: a.action_dim(),
            got: eps.action_dim(),
        });
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Validation(format!("tau {tau} outside [0, 1]")));
    }
    ActionChunk::new(a.matrix().zip_map(eps.matrix(), |x, e| tau * x + (1.0 - tau) * e))
}

/// Interpolants for a batch, one flattened chunk per column.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisedBatch {
    pub x: DMatrix<f64>,
    pub eps: DMatrix<f64>,
    pub tau: Vec<f64>,
    /// Regression target `eps - a`.
    pub target: DMatrix<f64>,
}

/// Draws `tau ~ U[0, 1]` and `eps ~ N(0, I)` per column of `actions`.
pub fn noise_batch<R: Rng + ?Sized>(actions: &DMatrix<f64>, rng: &mut R) -> Result<NoisedBatch> {
    let (d, b) = actions.shape();
    if b == 0 {
        return Err(Error::EmptyInput("flow batch is empty"));
    }
    let mut tau = Vec::with_capacity(b);
    let mut eps = DMatrix::zeros(d, b);
    for c in 0..b {
        tau.push(rng.random::<f64>());
        for r in 0..d {
            eps[(r, c)] = rng.sample(StandardNormal);
        }
    }
    let mut x = DMatrix::zeros(d, b);
    for c in 0..b {
        let t = tau[c];
        for r in 0..d {
            x[(r, c)] = t * actions[(r, c)] + (1.0 - t) * eps[(r, c)];
        }
    }
    let target = &eps - actions;
    Ok(NoisedBatch { x, eps, tau, target })
}

/// Mean squared error over all entries and its gradient with respect to `pred`.
pub fn fm_loss_from(pred: &DMatrix<f64>, batch: &NoisedBatch) -> Result<(f64, DMatrix<f64>)> {
    if pred.shape() != batch.target.shape() {
        return Err(Error::DimensionMismatch {
            expected: batch.target.len(),
            got: pred.len(),
        });
    }
    let diff = pred - &batch.target;
    let n = diff.len() as f64;
    Ok((diff.norm_squared() / n, diff * (2.0 / n)))
}

/// Flow-matching loss of `predict` on freshly drawn interpolants.
pub fn fm_loss<R, F>(actions: &DMatrix<f64>, rng: &mut R, predict: F) -> Result<(f64, DMatrix<f64>)>
where
    R: Rng + ?Sized,
    F: FnOnce(&NoisedBatch) -> Result<DMatrix<f64>>,
{
    let batch = noise_batch(actions, rng)?;
    let pred = predict(&batch)?;
    fm_loss_from(&pred, &batch)
}
