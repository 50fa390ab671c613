use std::io::Write;
use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::AggregatedDataset;
use super::policy::{LossWeights, ManagerNet};
use super::schedule::build_schedule;
use crate::data::Episode;
use crate::error::{Error, Result};
use crate::eval::{traces_mae, TrackingMetrics};
use crate::hash;
use crate::nn::{adam_step, AdamConfig, AdamState};
use crate::sim::{replay_episodes, EnvPool, RobotModel, SimConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainerConfig {
    /// `harmonized`, `online`, `online-dagger` or `standard-dagger`.
    pub mode: String,
    /// Parallel environments `N`.
    pub n_envs: usize,
    /// Rollout length `T`.
    pub horizon: usize,
    /// Training iterations `K`.
    pub iterations: usize,
    /// Aggregation period `M` (harmonized mode).
    pub period: usize,
    pub hidden: Vec<usize>,
    pub adam: AdamConfig,
    pub loss_weights: LossWeights,
    /// Passes over the dataset per aggregation event.
    pub da_epochs: usize,
    pub da_batch: usize,
    /// Optional cap on minibatch steps per aggregation event.
    pub da_max_minibatches: Option<usize>,
    /// Episodes held out for validation.
    pub validation_episodes: usize,
    /// Validate after every `validate_every`-th iteration (the last one always).
    pub validate_every: usize,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            mode: "harmonized".into(),
            n_envs: 512,
            horizon: 50,
            iterations: 200,
            period: 10,
            hidden: vec![256, 256],
            adam: AdamConfig::default(),
            loss_weights: LossWeights::default(),
            da_epochs: 1,
            da_batch: 4096,
            da_max_minibatches: None,
            validation_episodes: 32,
            validate_every: 1,
            seed: 0,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_envs", self.n_envs),
            ("horizon", self.horizon),
            ("iterations", self.iterations),
            ("period", self.period),
            ("da_epochs", self.da_epochs),
            ("da_batch", self.da_batch),
            ("validate_every", self.validate_every),
        ] {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("trainer `{name}` must be >= 1")));
            }
        }
        if self.hidden.contains(&0) {
            return Err(Error::InvalidConfig("hidden layer widths must be nonzero".into()));
        }
        if self.loss_weights.0.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidConfig("loss weights must be non-negative".into()));
        }
        self.adam.validate()?;
        build_schedule(self).map(|_| ())
    }
}

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub l_rollout: f64,
    pub l_da: Option<f64>,
    pub dataset_size: usize,
    pub validation: Option<TrackingMetrics>,
    /// Wall time of the iteration; kept out of [`TrainLog::to_csv`].
    pub seconds: f64,
}

/// Validation metrics split by whether goals leave the arms' reach.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub mobile: Option<TrackingMetrics>,
    pub static_: Option<TrackingMetrics>,
    pub n_mobile: usize,
    pub n_static: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub mode: String,
    /// Validation of the untrained manager.
    pub initial: TrackingMetrics,
    pub records: Vec<IterationLog>,
    pub split: SplitMetrics,
    pub validation_ids: Vec<String>,
}

pub const LOG_HEADER: &str = "iteration,l_rollout,l_da,dataset_size,e_p,e_r";

impl TrainLog {
    pub fn final_validation(&self) -> TrackingMetrics {
        self.records.iter().rev().find_map(|r| r.validation).unwrap_or(self.initial)
    }

    pub fn dataset_size(&self) -> usize {
        self.records.last().map_or(0, |r| r.dataset_size)
    }

    /// Per-iteration CSV; missing values are left empty. Iteration `-1`
    /// holds the untrained validation.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        let mut out = format!("{LOG_HEADER}\n-1,,,0,{},{}\n", self.initial.e_p, self.initial.e_r);
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.iteration,
                r.l_rollout,
                opt(r.l_da),
                r.dataset_size,
                opt(r.validation.map(|v| v.e_p)),
                opt(r.validation.map(|v| v.e_r)),
            ));
        }
        out
    }

    pub fn wall_seconds(&self) -> f64 {
        self.records.iter().map(|r| r.seconds).sum()
    }

    /// Per-iteration wall time, separate from the reproducible log.
    pub fn timing_csv(&self) -> String {
        let mut out = String::from("iteration,seconds\n");
        for r in &self.records {
            out.push_str(&format!("{},{:.4}\n", r.iteration, r.seconds));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
        f.write_all(self.to_csv().as_bytes()).map_err(|e| Error::file(path, e))
    }
}

/// Splits episodes into training and validation sets by a seeded shuffle.
/// With too few episodes the validation set reuses training episodes.
pub fn split_validation(episodes: &[Episode], count: usize, seed: u64) -> (Vec<Episode>, Vec<Episode>) {
    let mut idx: Vec<usize> = (0..episodes.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    if episodes.len() <= count {
        warn!("only {} episodes; validating on training episodes", episodes.len());
        let val = idx.iter().take(count).map(|&i| episodes[i].clone()).collect();
        return (episodes.to_vec(), val);
    }
    let (val, train) = idx.split_at(count);
    let mut val: Vec<usize> = val.to_vec();
    let mut train: Vec<usize> = train.to_vec();
    val.sort_unstable();
    train.sort_unstable();
    (
        train.into_iter().map(|i| episodes[i].clone()).collect(),
        val.into_iter().map(|i| episodes[i].clone()).collect(),
    )
}

/// An episode is mobile when some goal lies beyond arm reach from a base
/// parked at the origin at the goal height.
pub fn is_mobile(robot: &RobotModel, ep: &Episode, sim: &SimConfig) -> bool {
    let reach = |chain: &crate::geometry::KinematicChain| {
        let j = chain.joints();
        let links: f64 = j[1..].iter().map(|jt| jt.offset.position.norm()).sum();
        (j[0].offset.position, links + chain.tool().position.norm())
    };
    let arms = [reach(&robot.left_arm), reach(&robot.right_arm)];
    ep.steps.iter().any(|s| {
        let h = sim.goal_height(s);
        [&s.left_wrist, &s.right_wrist].iter().zip(&arms).any(|(g, (shoulder, r))| {
            let sh = nalgebra::Vector3::new(shoulder.x, shoulder.y, shoulder.z + h);
            (g.position - sh).norm() > *r
        })
    })
}

struct Validator<'a> {
    robot: &'a RobotModel,
    episodes: Vec<Episode>,
    sim: SimConfig,
    seed: u64,
}

impl Validator<'_> {
    fn run(&self, manager: &ManagerNet) -> Result<Vec<crate::sim::EpisodeTrace>> {
        let refs: Vec<&Episode> = self.episodes.iter().collect();
        replay_episodes(self.robot, &refs, manager, &self.sim, self.seed, true)
    }
}

/// Callback invoked after every iteration, e.g. for periodic checkpoints.
pub type Observer<'a> = dyn FnMut(&IterationLog, &ManagerNet) -> Result<()> + 'a;

pub fn train_manager(cfg: &TrainerConfig, episodes: &[Episode], robot: &RobotModel, sim: &SimConfig) -> Result<(ManagerNet, TrainLog)> {
    train_manager_with(cfg, episodes, robot, sim, &mut |_, _| Ok(()))
}

/// Trains the manager under the schedule named by `cfg.mode`. Each
/// iteration: roll out `N x T` steps with the current manager; take one
/// rollout-loss step (if the schedule asks); on aggregation iterations
/// append the rollout to the dataset and take dataset-loss steps.
pub fn train_manager_with(
    cfg: &TrainerConfig,
    episodes: &[Episode],
    robot: &RobotModel,
    sim: &SimConfig,
    observer: &mut Observer<'_>,
) -> Result<(ManagerNet, TrainLog)> {
    cfg.validate()?;
    sim.validate()?;
    if episodes.is_empty() {
        return Err(Error::EmptyInput("no training episodes"));
    }
    let schedule = build_schedule(cfg)?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(hash::stream(cfg.seed, 1));
    let mut manager = ManagerNet::new(&cfg.hidden, &mut init_rng)?;
    let mut adam = AdamState::new(&manager.net, cfg.adam);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(hash::stream(cfg.seed, 3));

    let (train, val) = split_validation(episodes, cfg.validation_episodes, hash::stream(cfg.seed, 2));
    let validator = Validator {
        robot,
        episodes: val,
        sim: SimConfig {
            worker: sim.worker.noiseless(),
            ..*sim
        },
        seed: hash::stream(cfg.seed, 4),
    };
    let initial = traces_mae(&validator.run(&manager)?)?;
    info!(
        "{}: untrained validation E_p {:.3} cm, E_r {:.3} deg",
        schedule.name(),
        initial.e_p,
        initial.e_r
    );

    let mut pool = EnvPool::new(robot, &train, cfg.n_envs, *sim, hash::stream(cfg.seed, 5))?;
    let mut data = AggregatedDataset::new();
    let mut records = Vec::with_capacity(cfg.iterations);
    let mut last_traces = None;
    for i in 0..cfg.iterations {
        let started = Instant::now();
        let batch = pool.rollout(&manager, cfg.horizon)?;
        let states: Vec<_> = batch.records.iter().map(|r| r.state).collect();
        let labels: Vec<_> = batch.records.iter().map(|r| r.label).collect();
        let x = ManagerNet::batch(&states);
        let l_rollout = if schedule.rollout_step() {
            let (loss, grads) = manager.loss_and_grad(&x, &labels, &cfg.loss_weights)?;
            adam_step(&mut manager.net, &grads, &mut adam)?;
            loss
        } else {
            super::policy::rollout_loss(&manager.predict_batch(&x)?, &labels, &cfg.loss_weights)?
        };
        if !l_rollout.is_finite() {
            return Err(Error::Diverged { iteration: i });
        }

        let l_da = if schedule.aggregate_at(i) {
            data.aggregate(&batch);
            let l = train_on_dataset(&mut manager, &mut adam, &data, cfg, &mut shuffle_rng)?;
            if !l.is_finite() {
                return Err(Error::Diverged { iteration: i });
            }
            Some(l)
        } else {
            None
        };
        if !manager.net.is_finite() {
            return Err(Error::Diverged { iteration: i });
        }

        let last = i + 1 == cfg.iterations;
        let validation = if last || (i + 1) % cfg.validate_every == 0 {
            let traces = validator.run(&manager)?;
            let m = traces_mae(&traces)?;
            if last {
                last_traces = Some(traces);
            }
            Some(m)
        } else {
            None
        };
        let rec = IterationLog {
            iteration: i,
            l_rollout,
            l_da,
            dataset_size: data.len(),
            validation,
            seconds: started.elapsed().as_secs_f64(),
        };
        if let Some(v) = validation {
            info!(
                "iter {i}: L_rollout {l_rollout:.5} |D| {} E_p {:.3} cm E_r {:.3} deg",
                data.len(),
                v.e_p,
                v.e_r
            );
        }
        observer(&rec, &manager)?;
        records.push(rec);
    }

    let mut split = SplitMetrics::default();
    if let Some(traces) = last_traces {
        let (mobile, fixed): (Vec<_>, Vec<_>) = traces
            .iter()
            .zip(&validator.episodes)
            .partition(|(_, ep)| is_mobile(robot, ep, sim));
        split.n_mobile = mobile.len();
        split.n_static = fixed.len();
        split.mobile = traces_mae(mobile.iter().map(|(t, _)| *t)).ok();
        split.static_ = traces_mae(fixed.iter().map(|(t, _)| *t)).ok();
    }
    let log = TrainLog {
        mode: schedule.name().to_string(),
        initial,
        records,
        split,
        validation_ids: validator.episodes.iter().map(|e| e.id.clone()).collect(),
    };
    Ok((manager, log))
}

/// Seeded-shuffle minibatch passes over the dataset; returns the mean
/// pre-step minibatch loss.
pub fn train_on_dataset(
    manager: &mut ManagerNet,
    adam: &mut AdamState,
    data: &AggregatedDataset,
    cfg: &TrainerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyInput("aggregated dataset is empty"));
    }
    let mut idx: Vec<usize> = (0..data.len()).collect();
    let (mut total, mut steps) = (0.0, 0usize);
    for _ in 0..cfg.da_epochs {
        idx.shuffle(rng);
        for (k, chunk) in idx.chunks(cfg.da_batch).enumerate() {
            if cfg.da_max_minibatches.is_some_and(|cap| k >= cap) {
                break;
            }
            let (x, labels) = data.gather(chunk);
            let (loss, grads) = manager.loss_and_grad(&x, &labels, &cfg.loss_weights)?;
            adam_step(&mut manager.net, &grads, adam)?;
            total += loss;
            steps += 1;
        }
    }
    Ok(total / steps as f64)
}
