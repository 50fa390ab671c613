use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::chunk::FlowDataset;
use super::model::{FlowCodec, FlowHead, FlowModel};
use crate::error::{Error, Result};
use crate::hash;
use crate::nn::checkpoint::{read_adam, read_net, write_adam, write_net};
use crate::nn::{adam_step, AdamConfig, AdamState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    pub hidden: Vec<usize>,
    pub head: FlowHead,
    pub batch: usize,
    pub steps: usize,
    pub adam: AdamConfig,
    /// Euler steps used when sampling.
    pub sample_steps: usize,
    /// Checkpoint period in optimiser steps; 0 disables intermediate checkpoints.
    pub checkpoint_every: usize,
    pub seed: u64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            hidden: vec![512; 3],
            head: FlowHead::Affine,
            batch: 64,
            steps: 2000,
            adam: AdamConfig::default(),
            sample_steps: 4,
            checkpoint_every: 500,
            seed: 0,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::InvalidConfig("flow hidden sizes must be nonempty and positive".into()));
        }
        if self.batch == 0 || self.sample_steps == 0 {
            return Err(Error::InvalidConfig("flow batch and sample_steps must be positive".into()));
        }
        self.adam.validate()
    }
}

/// Everything needed to continue training bit-identically.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrainState {
    pub model: FlowModel,
    pub adam: AdamState,
    /// Optimiser steps taken so far.
    pub step: usize,
    /// Loss of every step taken so far.
    pub losses: Vec<f64>,
}

impl FlowTrainState {
    pub fn new(data: &FlowDataset, cfg: &FlowConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(hash::stream(cfg.seed, 1));
        let model = FlowModel::new(FlowCodec::fit(data)?, &cfg.hidden, cfg.head, &mut rng)?;
        let adam = AdamState::new(&model.net, cfg.adam);
        Ok(Self {
            model,
            adam,
            step: 0,
            losses: Vec::new(),
        })
    }
}

fn step_rng(seed: u64, step: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(hash::stream(hash::stream(seed, 2), step as u64))
}

fn gather(data: &FlowDataset, codec: &FlowCodec, idx: &[usize]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let mut actions = DMatrix::zeros(codec.chunk_dim(), idx.len());
    let mut cond = DMatrix::zeros(codec.cond_dim(), idx.len());
    for (c, &i) in idx.iter().enumerate() {
        let (task, state, chunk) = data.sample(i);
        actions.column_mut(c).copy_from_slice(&codec.encode_chunk(&chunk));
        cond.column_mut(c).copy_from_slice(&codec.conditioning(state, task)?);
    }
    Ok((actions, cond))
}

/// One optimiser step; minibatch indices and noise come from a stream keyed
/// by `(seed, step)`.
pub fn train_step(state: &mut FlowTrainState, data: &FlowDataset, cfg: &FlowConfig) -> Result<f64> {
    let mut rng = step_rng(cfg.seed, state.step);
    let idx: Vec<usize> = (0..cfg.batch).map(|_| rng.random_range(0..data.len())).collect();
    let (actions, cond) = gather(data, &state.model.codec, &idx)?;
    let (loss, grads) = state.model.loss_and_grad(&actions, &cond, &mut rng)?;
    if !loss.is_finite() {
        return Err(Error::Diverged { iteration: state.step });
    }
    adam_step(&mut state.model.net, &grads, &mut state.adam)?;
    state.step += 1;
    state.losses.push(loss);
    Ok(loss)
}

/// Trains from scratch for `cfg.steps` steps.
pub fn train_flow(data: &FlowDataset, cfg: &FlowConfig, out: Option<&Path>) -> Result<FlowTrainState> {
    train_flow_from(FlowTrainState::new(data, cfg)?, data, cfg, out)
}

/// Continues `state` up to `cfg.steps` steps, checkpointing into `out/checkpoints`.
pub fn train_flow_from(mut state: FlowTrainState, data: &FlowDataset, cfg: &FlowConfig, out: Option<&Path>) -> Result<FlowTrainState> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyInput("flow dataset is empty"));
    }
    if state.model.codec.action_dim() != data.action_dim() || state.model.codec.state_dim() != data.state_dim() {
        return Err(Error::DimensionMismatch {
            expected: state.model.codec.action_dim(),
            got: data.action_dim(),
        });
    }
    while state.step < cfg.steps {
        let loss = train_step(&mut state, data, cfg)?;
        if state.step.is_multiple_of(100) {
            log::info!("flow step {} loss {loss:.5}", state.step);
        }
        if let Some(dir) = out {
            if cfg.checkpoint_every > 0 && state.step.is_multiple_of(cfg.checkpoint_every) {
                save_checkpoint(&state, &checkpoint_dir(dir, state.step))?;
            }
        }
    }
    if let Some(dir) = out {
        write_loss_csv(&state.losses, &dir.join("flow_loss.csv"))?;
        save_checkpoint(&state, &dir.join("model"))?;
    }
    Ok(state)
}

pub fn checkpoint_dir(out: &Path, step: usize) -> PathBuf {
    out.join("checkpoints").join(format!("step-{step:06}"))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointMeta {
    step: usize,
    codec: FlowCodec,
    head: FlowHead,
    losses: Vec<f64>,
}

/// Writes `weights.bin` (network plus optimiser state) and `meta.json`.
pub fn save_checkpoint(state: &FlowTrainState, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    let path = dir.join("weights.bin");
    let mut w = BufWriter::new(File::create(&path).map_err(|e| Error::file(&path, e))?);
    write_net(&mut w, &state.model.net)?;
    write_adam(&mut w, &state.adam)?;
    w.flush()?;
    let meta = CheckpointMeta {
        step: state.step,
        codec: state.model.codec.clone(),
        head: state.model.head,
        losses: state.losses.clone(),
    };
    let path = dir.join("meta.json");
    std::fs::write(&path, serde_json::to_string(&meta)? + "\n").map_err(|e| Error::file(&path, e))
}

pub fn load_checkpoint(dir: &Path) -> Result<FlowTrainState> {
    let path = dir.join("meta.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::file(&path, e))?;
    let meta: CheckpointMeta = serde_json::from_str(&text)?;
    let path = dir.join("weights.bin");
    let mut r = BufReader::new(File::open(&path).map_err(|e| Error::file(&path, e))?);
    let net = read_net(&mut r)?;
    let adam = read_adam(&mut r, &net)?;
    Ok(FlowTrainState {
        model: FlowModel::from_parts(net, meta.codec, meta.head)?,
        adam,
        step: meta.step,
        losses: meta.losses,
    })
}

pub fn write_loss_csv(losses: &[f64], path: &Path) -> Result<()> {
    let mut s = String::from("step,loss\n");
    for (k, l) in losses.iter().enumerate() {
        s.push_str(&format!("{},{l}\n", k + 1));
    }
    std::fs::write(path, s).map_err(|e| Error::file(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::tests::constant_dataset;

    fn small() -> FlowConfig {
        FlowConfig {
            hidden: vec![32, 32],
            batch: 8,
            steps: 12,
            checkpoint_every: 5,
            seed: 3,
            ..FlowConfig::default()
        }
    }

    #[test]
    fn resume_matches_uninterrupted() {
        let data = constant_dataset(20, 0.3);
        let cfg = small();
        let dir = tempfile::tempdir().unwrap();
        let full = train_flow(&data, &cfg, Some(dir.path())).unwrap();
        let resumed = load_checkpoint(&checkpoint_dir(dir.path(), 5)).unwrap();
        assert_eq!(resumed.step, 5);
        let cont = train_flow_from(resumed, &data, &cfg, None).unwrap();
        assert_eq!(cont, full);
        assert_eq!(load_checkpoint(&dir.path().join("model")).unwrap(), full);
        let csv = std::fs::read_to_string(dir.path().join("flow_loss.csv")).unwrap();
        assert_eq!(csv.lines().count(), 13);
    }

    #[test]
    fn too_short_dataset_is_rejected() {
        let reps = crate::flow::tests::constant_episodes(10, 0.0);
        assert!(FlowDataset::from_episodes(&reps).is_err());
    }
}
