use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::chunk::{ActionChunk, FlowDataset, Normalizer, CHUNK_LEN, COMMAND_CHANNELS};
use super::objective::{fm_loss_from, noise_batch};
use crate::error::{Error, Result};
use crate::nn::{Activation, DenseNet, Gradients};
use crate::sim::COMMAND_RANGES;

/// Velocity field over normalised flattened chunks, one sample per column.
pub trait VelocityField {
    fn velocity(&self, x: &DMatrix<f64>, cond: &DMatrix<f64>, tau: &[f64]) -> Result<DMatrix<f64>>;
}

/// Vocabulary and normalisation shared by training and sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowCodec {
    /// One task id per distinct instruction, sorted.
    pub tasks: Vec<String>,
    pub action_norm: Normalizer,
    pub state_norm: Normalizer,
}

impl FlowCodec {
    pub fn fit(data: &FlowDataset) -> Result<Self> {
        Ok(Self {
            tasks: data.tasks().to_vec(),
            action_norm: Normalizer::fit(&data.action_rows())?,
            state_norm: Normalizer::fit(&data.state_rows())?,
        })
    }

    pub fn action_dim(&self) -> usize {
        self.action_norm.dim()
    }

    pub fn state_dim(&self) -> usize {
        self.state_norm.dim()
    }

    pub fn chunk_dim(&self) -> usize {
        CHUNK_LEN * self.action_dim()
    }

    pub fn cond_dim(&self) -> usize {
        self.state_dim() + self.tasks.len()
    }

    pub fn task_id(&self, instruction: &str) -> Result<usize> {
        self.tasks
            .binary_search_by(|t| t.as_str().cmp(instruction))
            .map_err(|_| Error::UnknownName {
                kind: "task instruction",
                name: instruction.to_string(),
                available: self.tasks.join(", "),
            })
    }

    /// Normalised state followed by a one-hot task id.
    pub fn conditioning(&self, state: &[f64], task: usize) -> Result<Vec<f64>> {
        if state.len() != self.state_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.state_dim(),
                got: state.len(),
            });
        }
        if task >= self.tasks.len() {
            return Err(Error::Validation(format!("task id {task} out of range")));
        }
        let mut c = self.state_norm.normalize(state);
        c.extend((0..self.tasks.len()).map(|k| if k == task { 1.0 } else { 0.0 }));
        Ok(c)
    }

    pub fn encode_chunk(&self, flat: &[f64]) -> Vec<f64> {
        flat.chunks(self.action_dim())
            .flat_map(|row| self.action_norm.normalize(row))
            .collect()
    }

    /// Denormalises and clamps the command channels into their ranges.
    pub fn decode_chunk(&self, flat: &[f64]) -> Result<ActionChunk> {
        let a = self.action_dim();
        let mut raw: Vec<f64> = flat.chunks(a).flat_map(|row| self.action_norm.denormalize(row)).collect();
        for row in raw.chunks_mut(a) {
            for (c, v) in row[a - COMMAND_CHANNELS..].iter_mut().enumerate() {
                *v = v.clamp(COMMAND_RANGES[c][0], COMMAND_RANGES[c][1]);
            }
        }
        ActionChunk::from_flat(a, &raw)
    }
}

pub fn tau_features(tau: f64) -> [f64; 3] {
    let w = 2.0 * std::f64::consts::PI * tau;
    [tau, w.sin(), w.cos()]
}

/// Euler integration of `dx/dtau = -v` from `tau = 0` to 1.
pub fn integrate(field: &dyn VelocityField, cond: &DMatrix<f64>, eps: DMatrix<f64>, steps: usize) -> Result<DMatrix<f64>> {
    if steps == 0 {
        return Err(Error::InvalidConfig("sampler needs at least one step".into()));
    }
    let dt = 1.0 / steps as f64;
    let mut x = eps;
    for k in 0..steps {
        let tau = vec![k as f64 * dt; x.ncols()];
        let v = field.velocity(&x, cond, &tau)?;
        x -= v * dt;
    }
    Ok(x)
}

/// Draws one chunk for raw proprioceptive `state` and task id.
pub fn sample_chunk<R: Rng + ?Sized>(
    field: &dyn VelocityField,
    codec: &FlowCodec,
    state: &[f64],
    task: usize,
    steps: usize,
    rng: &mut R,
) -> Result<ActionChunk> {
    let cond = DMatrix::from_column_slice(codec.cond_dim(), 1, &codec.conditioning(state, task)?);
    let eps = DMatrix::from_fn(codec.chunk_dim(), 1, |_, _| rng.sample(StandardNormal));
    let x = integrate(field, &cond, eps, steps)?;
    codec.decode_chunk(x.as_slice())
}

/// How network outputs become a velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowHead {
    /// `v = f`.
    Direct,
    /// `v = x + f`.
    Residual,
    /// `v = (1 + s) * x + b` elementwise, with `f = [s; b]`.
    #[default]
    Affine,
}

impl FlowHead {
    fn outputs(self, d: usize) -> usize {
        match self {
            FlowHead::Affine => 2 * d,
            _ => d,
        }
    }

    fn apply(self, f: DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            FlowHead::Direct => f,
            FlowHead::Residual => f + x,
            FlowHead::Affine => {
                let d = x.nrows();
                let s = f.rows(0, d);
                let b = f.rows(d, d);
                DMatrix::from_fn(d, x.ncols(), |r, c| (1.0 + s[(r, c)]) * x[(r, c)] + b[(r, c)])
            }
        }
    }

    /// Gradient with respect to `f` given the gradient with respect to `v`.
    fn pull_back(self, g: DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            FlowHead::Affine => {
                let d = x.nrows();
                let mut out = DMatrix::zeros(2 * d, x.ncols());
                out.rows_mut(0, d).copy_from(&g.component_mul(x));
                out.rows_mut(d, d).copy_from(&g);
                out
            }
            _ => g,
        }
    }
}

/// Dense velocity network on `[x, conditioning, tau features]`, read out
/// through a [`FlowHead`].
#[derive(Debug, Clone, PartialEq)]
pub struct FlowModel {
    pub net: DenseNet,
    pub codec: FlowCodec,
    pub head: FlowHead,
}

impl FlowModel {
    pub fn new<R: Rng + ?Sized>(codec: FlowCodec, hidden: &[usize], head: FlowHead, rng: &mut R) -> Result<Self> {
        let d = codec.chunk_dim();
        let mut sizes = vec![d + codec.cond_dim() + 3];
        sizes.extend(hidden);
        sizes.push(head.outputs(d));
        Ok(Self {
            net: DenseNet::new(&sizes, Activation::Elu, Activation::Identity, rng)?,
            codec,
            head,
        })
    }

    pub fn from_parts(net: DenseNet, codec: FlowCodec, head: FlowHead) -> Result<Self> {
        let d = codec.chunk_dim();
        if net.input_dim() != d + codec.cond_dim() + 3 || net.output_dim() != head.outputs(d) {
            return Err(Error::DimensionMismatch {
                expected: d + codec.cond_dim() + 3,
                got: net.input_dim(),
            });
        }
        Ok(Self { net, codec, head })
    }

    fn input(&self, x: &DMatrix<f64>, cond: &DMatrix<f64>, tau: &[f64]) -> Result<DMatrix<f64>> {
        let (d, c) = (self.codec.chunk_dim(), self.codec.cond_dim());
        let b = x.ncols();
        if x.nrows() != d || cond.nrows() != c || cond.ncols() != b || tau.len() != b {
            return Err(Error::DimensionMismatch {
                expected: d + c,
                got: x.nrows() + cond.nrows(),
            });
        }
        let mut z = DMatrix::zeros(d + c + 3, b);
        z.rows_mut(0, d).copy_from(x);
        z.rows_mut(d, c).copy_from(cond);
        for (k, &t) in tau.iter().enumerate() {
            let f = tau_features(t);
            for i in 0..3 {
                z[(d + c + i, k)] = f[i];
            }
        }
        Ok(z)
    }

    /// Loss on normalised chunks (columns) and conditioning, with its gradient.
    pub fn loss_and_grad<R: Rng + ?Sized>(&self, actions: &DMatrix<f64>, cond: &DMatrix<f64>, rng: &mut R) -> Result<(f64, Gradients)> {
        let batch = noise_batch(actions, rng)?;
        let (f, cache) = self.net.forward_cached(&self.input(&batch.x, cond, &batch.tau)?)?;
        let (loss, g) = fm_loss_from(&self.head.apply(f, &batch.x), &batch)?;
        let (grads, _) = self.net.backward(&cache, &self.head.pull_back(g, &batch.x))?;
        Ok((loss, grads))
    }

    pub fn sample<R: Rng + ?Sized>(&self, state: &[f64], instruction: &str, steps: usize, rng: &mut R) -> Result<ActionChunk> {
        sample_chunk(self, &self.codec, state, self.codec.task_id(instruction)?, steps, rng)
    }

    /// Open-loop rollout of `len` actions, one chunk at a time. The state
    /// for the next chunk is built from the last generated action, taking
    /// the commanded height and velocities as the base summary.
    pub fn generate<R: Rng + ?Sized>(
        &self,
        initial_state: &[f64],
        instruction: &str,
        len: usize,
        sample_steps: usize,
        rng: &mut R,
    ) -> Result<Vec<Vec<f64>>> {
        let a = self.codec.action_dim();
        if self.codec.state_dim() != a {
            return Err(Error::DimensionMismatch {
                expected: a,
                got: self.codec.state_dim(),
            });
        }
        let task = self.codec.task_id(instruction)?;
        let mut state = initial_state.to_vec();
        let mut out = Vec::with_capacity(len);
        while out.len() < len {
            let chunk = sample_chunk(self, &self.codec, &state, task, sample_steps, rng)?;
            for t in 0..CHUNK_LEN.min(len - out.len()) {
                out.push(chunk.row(t));
            }
            let last = out.last().expect("at least one action");
            let cmd = &last[a - COMMAND_CHANNELS..];
            state = last[..a - COMMAND_CHANNELS].to_vec();
            state.extend([cmd[3], cmd[0], cmd[1], cmd[2]]);
        }
        Ok(out)
    }
}

impl VelocityField for FlowModel {
    fn velocity(&self, x: &DMatrix<f64>, cond: &DMatrix<f64>, tau: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.head.apply(self.net.forward(&self.input(x, cond, tau)?)?, x))
    }
}
