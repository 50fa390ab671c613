use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, DenseNet, ForwardCache, Gradients};
use crate::sim::{LowerBodyCommand, ManagerPolicy, ManagerState, COMMAND_RANGES, STATE_DIM};

/// Per-channel weights of the command loss, `(v_x, v_y, v_yaw, h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LossWeights(pub [f64; 4]);

impl Default for LossWeights {
    fn default() -> Self {
        Self([1.0, 1.0, 1.0, 2.0])
    }
}

impl LossWeights {
    /// Weighted squared error averaged over the four channels.
    pub fn pair_loss(&self, out: &LowerBodyCommand, target: &LowerBodyCommand) -> f64 {
        let (o, t) = (out.to_array(), target.to_array());
        (0..4).map(|c| self.0[c] * (o[c] - t[c]).powi(2)).sum::<f64>() / 4.0
    }
}

/// Mean command loss over matched output/target pairs.
pub fn rollout_loss(outputs: &[LowerBodyCommand], targets: &[LowerBodyCommand], weights: &LossWeights) -> Result<f64> {
    if outputs.is_empty() {
        return Err(Error::EmptyInput("no command pairs"));
    }
    if outputs.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: outputs.len(),
            got: targets.len(),
        });
    }
    Ok(outputs.iter().zip(targets).map(|(o, t)| weights.pair_loss(o, t)).sum::<f64>() / outputs.len() as f64)
}

/// Manager network: raw outputs squashed into the command ranges
/// (`tanh` for velocities, a scaled sigmoid for height), so every output is
/// feasible by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ManagerNet {
    pub net: DenseNet,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl ManagerNet {
    pub fn new<R: Rng + ?Sized>(hidden: &[usize], rng: &mut R) -> Result<Self> {
        let mut sizes = vec![STATE_DIM];
        sizes.extend_from_slice(hidden);
        sizes.push(4);
        Self::from_net(DenseNet::new(&sizes, Activation::Elu, Activation::Identity, rng)?)
    }

    pub fn from_net(net: DenseNet) -> Result<Self> {
        if net.input_dim() != STATE_DIM || net.output_dim() != 4 {
            return Err(Error::DimensionMismatch {
                expected: STATE_DIM,
                got: net.input_dim(),
            });
        }
        Ok(Self { net })
    }

    pub fn batch(states: &[ManagerState]) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(STATE_DIM, states.len());
        for (c, s) in states.iter().enumerate() {
            x.column_mut(c).copy_from_slice(&s.features());
        }
        x
    }

    fn squash(raw: &DMatrix<f64>) -> Vec<LowerBodyCommand> {
        raw.column_iter()
            .map(|z| {
                let mut a = [0.0; 4];
                for c in 0..3 {
                    let [lo, hi] = COMMAND_RANGES[c];
                    a[c] = 0.5 * (lo + hi) + 0.5 * (hi - lo) * z[c].tanh();
                }
                let [lo, hi] = COMMAND_RANGES[3];
                a[3] = lo + (hi - lo) * sigmoid(z[3]);
                LowerBodyCommand::from_array(a)
            })
            .collect()
    }

    pub fn predict(&self, states: &[ManagerState]) -> Vec<LowerBodyCommand> {
        self.predict_batch(&Self::batch(states)).expect("manager input has STATE_DIM rows")
    }

    /// Commands for a feature matrix with one state per column.
    pub fn predict_batch(&self, x: &DMatrix<f64>) -> Result<Vec<LowerBodyCommand>> {
        Ok(Self::squash(&self.net.forward(x)?))
    }

    /// Loss over `(state, label)` pairs and its parameter gradient.
    pub fn loss_and_grad(&self, x: &DMatrix<f64>, labels: &[LowerBodyCommand], weights: &LossWeights) -> Result<(f64, Gradients)> {
        let (raw, cache): (DMatrix<f64>, ForwardCache) = self.net.forward_cached(x)?;
        let outs = Self::squash(&raw);
        let loss = rollout_loss(&outs, labels, weights)?;
        let n = labels.len() as f64;
        let mut g = DMatrix::zeros(4, labels.len());
        for (k, (o, t)) in outs.iter().zip(labels).enumerate() {
            let (o, t) = (o.to_array(), t.to_array());
            for c in 0..4 {
                let dl = weights.0[c] * 2.0 * (o[c] - t[c]) / (4.0 * n);
                let z = raw[(c, k)];
                let dout = if c < 3 {
                    let [lo, hi] = COMMAND_RANGES[c];
                    let th = z.tanh();
                    0.5 * (hi - lo) * (1.0 - th * th)
                } else {
                    let [lo, hi] = COMMAND_RANGES[3];
                    let s = sigmoid(z);
                    (hi - lo) * s * (1.0 - s)
                };
                g[(c, k)] = dl * dout;
            }
        }
        let (grads, _) = self.net.backward(&cache, &g)?;
        Ok((loss, grads))
    }
}

impl ManagerPolicy for ManagerNet {
    fn act(&self, states: &[ManagerState]) -> Vec<LowerBodyCommand> {
        self.predict(states)
    }
}
