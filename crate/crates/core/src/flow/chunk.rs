use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::RetargetedEpisode;

/// Timesteps per action chunk (0.8 s at 20 Hz).
pub const CHUNK_LEN: usize = 16;
/// Trailing action channels holding `(v_x, v_y, v_yaw, h)`.
pub const COMMAND_CHANNELS: usize = 4;
/// Base summary appended to the joint state: `(h, v_x, v_y, v_yaw)`.
pub const BASE_FEATURES: usize = 4;

/// `CHUNK_LEN x A` block of consecutive actions, one timestep per row.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionChunk {
    data: DMatrix<f64>,
}

impl ActionChunk {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() != CHUNK_LEN {
            return Err(Error::DimensionMismatch {
                expected: CHUNK_LEN,
                got: data.nrows(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("action chunk has non-finite entries".into()));
        }
        Ok(Self { data })
    }

    /// From timestep-major values (`flat[t * A + d]`).
    pub fn from_flat(action_dim: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != CHUNK_LEN * action_dim {
            return Err(Error::DimensionMismatch {
                expected: CHUNK_LEN * action_dim,
                got: flat.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(CHUNK_LEN, action_dim, flat))
    }

    pub fn horizon(&self) -> usize {
        self.data.nrows()
    }

    pub fn action_dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn row(&self, t: usize) -> Vec<f64> {
        self.data.row(t).iter().copied().collect()
    }

    /// Timestep-major copy of the entries.
    pub fn to_flat(&self) -> Vec<f64> {
        (0..self.horizon())
            .flat_map(|t| self.data.row(t).iter().copied().collect::<Vec<_>>())
            .collect()
    }
}

/// Per-dimension affine standardisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Dimensions with a spread below this are left unscaled.
const DEGENERATE_STD: f64 = 1e-8;

impl Normalizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Mean and population std per dimension.
    pub fn fit(rows: &[&[f64]]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyInput("no rows to normalise"))?;
        let dim = first.len();
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: r.len(),
            });
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(*r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for k in 0..dim {
                let d = r[k] - mean[k];
                var[k] += d * d;
            }
        }
        let std = var
            .iter()
            .map(|v| (v / n).sqrt())
            .map(|s| if s < DEGENERATE_STD { 1.0 } else { s })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s).collect()
    }

    pub fn denormalize(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| v * s + m).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct EpisodeRows {
    task: usize,
    actions: Vec<Vec<f64>>,
    states: Vec<Vec<f64>>,
}

/// Sliding-window (stride 1) chunk view over retargeted episodes. Windows
/// that run past the end of an episode repeat its last action.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowDataset {
    tasks: Vec<String>,
    action_dim: usize,
    state_dim: usize,
    episodes: Vec<EpisodeRows>,
    index: Vec<(usize, usize)>,
}

/// Proprioceptive state before step `t`: joints of the previous action and
/// the previous base summary (step 0 uses its own values).
pub fn proprio_state(ep: &RetargetedEpisode, t: usize) -> Vec<f64> {
    let s = &ep.steps[t.saturating_sub(1)];
    let a = &s.action;
    let mut q = Vec::with_capacity(a.left_arm.len() * 2 + a.left_hand.len() * 2 + BASE_FEATURES);
    q.extend(&a.left_arm);
    q.extend(&a.right_arm);
    q.extend(&a.left_hand);
    q.extend(&a.right_hand);
    q.extend([s.base.h, s.base.v_x, s.base.v_y, s.base.v_yaw]);
    q
}

impl FlowDataset {
    pub fn from_episodes(reps: &[RetargetedEpisode]) -> Result<Self> {
        let total: usize = reps.iter().map(|e| e.steps.len()).sum();
        if total < CHUNK_LEN {
            return Err(Error::Validation(format!(
                "dataset has {total} steps, fewer than one chunk of {CHUNK_LEN}"
            )));
        }
        let mut tasks: Vec<String> = reps.iter().map(|e| e.instruction.clone()).collect();
        tasks.sort();
        tasks.dedup();
        let action_dim = reps[0].steps[0].action.to_vec().len();
        let state_dim = proprio_state(&reps[0], 0).len();
        if action_dim < COMMAND_CHANNELS {
            return Err(Error::Validation("actions lack command channels".into()));
        }
        let mut episodes = Vec::with_capacity(reps.len());
        let mut index = Vec::with_capacity(total);
        for (e, ep) in reps.iter().enumerate() {
            ep.validate()?;
            let actions: Vec<Vec<f64>> = ep.steps.iter().map(|s| s.action.to_vec()).collect();
            let states: Vec<Vec<f64>> = (0..ep.steps.len()).map(|t| proprio_state(ep, t)).collect();
            if actions[0].len() != action_dim || states[0].len() != state_dim {
                return Err(Error::DimensionMismatch {
                    expected: action_dim,
                    got: actions[0].len(),
                });
            }
            index.extend((0..actions.len()).map(|t| (e, t)));
            episodes.push(EpisodeRows {
                task: tasks.binary_search(&ep.instruction).expect("instruction in vocabulary"),
                actions,
                states,
            });
        }
        Ok(Self {
            tasks,
            action_dim,
            state_dim,
            episodes,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn tasks(&self) -> &[String] {
        &self.tasks
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    /// Task id, state and flattened raw chunk of window `i`.
    pub fn sample(&self, i: usize) -> (usize, &[f64], Vec<f64>) {
        let (e, t) = self.index[i];
        let ep = &self.episodes[e];
        let last = ep.actions.len() - 1;
        let chunk = (0..CHUNK_LEN).flat_map(|k| ep.actions[(t + k).min(last)].iter().copied()).collect();
        (ep.task, &ep.states[t], chunk)
    }

    pub fn action_rows(&self) -> Vec<&[f64]> {
        self.episodes.iter().flat_map(|e| e.actions.iter().map(Vec::as_slice)).collect()
    }

    pub fn state_rows(&self) -> Vec<&[f64]> {
        self.episodes.iter().flat_map(|e| e.states.iter().map(Vec::as_slice)).collect()
    }
}
