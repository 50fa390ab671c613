use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::command::LowerBodyCommand;
use super::robot::RobotModel;
use super::state::{heuristic_commands, make_manager_state, ManagerState, PrivilegedInfo};
use super::worker::{worker_step, BaseState, WorkerModel};
use crate::data::{Episode, Step};
use crate::error::{Error, Result};
use crate::geometry::{clik_solve, compose, pose_error, IkConfig, JointVector, KinematicChain, Pose, PoseError};
use crate::hash;

/// Anything that maps a batch of manager states to lower-body commands.
pub trait ManagerPolicy {
    fn act(&self, states: &[ManagerState]) -> Vec<LowerBodyCommand>;
}

/// Zero planar velocity; holds the current torso height.
#[derive(Debug, Clone, Copy, Default)]
pub struct HoldPolicy;

impl ManagerPolicy for HoldPolicy {
    fn act(&self, states: &[ManagerState]) -> Vec<LowerBodyCommand> {
        states.iter().map(|s| LowerBodyCommand::new(0.0, 0.0, 0.0, s.h)).collect()
    }
}

impl<F: Fn(&ManagerState) -> LowerBodyCommand> ManagerPolicy for F {
    fn act(&self, states: &[ManagerState]) -> Vec<LowerBodyCommand> {
        states.iter().map(self).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub worker: WorkerModel,
    /// Per-tick arm IK budget; warm-started from the previous tick.
    pub ik: IkConfig,
    /// IK budget used to place the arms when an episode (re)starts.
    pub settle_iters: usize,
    /// Goal height fallback for steps without an augmented `h*`: wrist midline minus this.
    pub wrist_to_torso: f64,
    /// Training segments start uniformly in the first `max_start_fraction` of an episode.
    pub max_start_fraction: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            worker: WorkerModel::default(),
            ik: IkConfig {
                max_iters: 25,
                restarts: 0,
                ..IkConfig::default()
            },
            settle_iters: 200,
            wrist_to_torso: 0.10,
            max_start_fraction: 0.5,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.worker.validate()?;
        if self.ik.max_iters == 0 || !(self.ik.damping >= 0.0) || !(self.ik.step_scale > 0.0) {
            return Err(Error::InvalidConfig("ik needs max_iters >= 1, damping >= 0, step_scale > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.max_start_fraction) {
            return Err(Error::InvalidConfig("max_start_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Goal torso height of a step.
    pub fn goal_height(&self, step: &Step) -> f64 {
        let [lo, hi] = super::command::HEIGHT_RANGE;
        step.goal_height.unwrap_or_else(|| {
            let mid = 0.5 * (step.left_wrist.position.z + step.right_wrist.position.z);
            (mid - self.wrist_to_torso).clamp(lo, hi)
        })
    }
}

/// Full kinematic state of the simulated humanoid.
#[derive(Debug, Clone, PartialEq)]
pub struct HumanoidState {
    pub base: BaseState,
    pub q_left: Vec<f64>,
    pub q_right: Vec<f64>,
}

impl HumanoidState {
    /// Base at the world origin with height `h`, arms placed on `goal` by IK.
    pub fn settled(robot: &RobotModel, goal: (&Pose, &Pose), h: f64, cfg: &SimConfig) -> Result<Self> {
        let base = BaseState::at_rest(h);
        let ik = IkConfig {
            max_iters: cfg.settle_iters,
            ..cfg.ik
        };
        let frame = base.pose().inverse();
        let solve = |chain: &KinematicChain, g: &Pose| -> Result<Vec<f64>> {
            Ok(clik_solve(chain, &compose(&frame, g), &chain.zero_configuration(), &ik)?.q.values)
        };
        Ok(Self {
            base,
            q_left: solve(&robot.left_arm, goal.0)?,
            q_right: solve(&robot.right_arm, goal.1)?,
        })
    }

    /// World-frame wrist poses.
    pub fn wrist_poses(&self, robot: &RobotModel) -> [Pose; 2] {
        let b = self.base.pose();
        [
            compose(&b, &robot.left_arm.fk_raw(&self.q_left)),
            compose(&b, &robot.right_arm.fk_raw(&self.q_right)),
        ]
    }
}

/// What one control tick produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickOutcome {
    /// Command as executed (after clipping).
    pub command: LowerBodyCommand,
    pub executed: [Pose; 2],
    pub residual: [PoseError; 2],
}

/// One control tick: clip the command, advance the base, then solve both
/// arms toward the goals expressed in the new base frame.
///
/// With `warm_start = false` the IK starts from the zero configuration.
pub fn advance<R: Rng + ?Sized>(
    robot: &RobotModel,
    state: &mut HumanoidState,
    cmd: &LowerBodyCommand,
    goal: (&Pose, &Pose),
    cfg: &SimConfig,
    warm_start: bool,
    rng: &mut R,
) -> Result<TickOutcome> {
    let command = cmd.clipped();
    state.base = worker_step(&state.base, &command, &cfg.worker, rng);
    let frame = state.base.pose().inverse();
    for (chain, q, g) in [
        (&robot.left_arm, &mut state.q_left, goal.0),
        (&robot.right_arm, &mut state.q_right, goal.1),
    ] {
        let q0 = if warm_start {
            JointVector::new(chain.id(), std::mem::take(q))
        } else {
            chain.zero_configuration()
        };
        *q = clik_solve(chain, &compose(&frame, g), &q0, &cfg.ik)?.q.values;
    }
    let executed = state.wrist_poses(robot);
    Ok(TickOutcome {
        command,
        residual: [pose_error(&executed[0], goal.0), pose_error(&executed[1], goal.1)],
        executed,
    })
}

/// One labelled transition of a training rollout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutRecord {
    pub state: ManagerState,
    /// Heuristic target `a*` from privileged information.
    pub label: LowerBodyCommand,
    pub command: LowerBodyCommand,
    pub executed: [Pose; 2],
    pub goal: [Pose; 2],
}

/// Records of an `N`-env, `T`-step rollout, env-major then step-minor.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBatch {
    pub n_envs: usize,
    pub horizon: usize,
    pub records: Vec<RolloutRecord>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn record(&self, env: usize, step: usize) -> &RolloutRecord {
        &self.records[env * self.horizon + step]
    }
}

#[derive(Debug, Clone)]
struct Env {
    state: HumanoidState,
    episode: usize,
    cursor: usize,
    rng: ChaCha8Rng,
    resamples: usize,
}

/// `N` independent environments cycling over goal streams taken from `episodes`.
pub struct EnvPool<'a> {
    robot: &'a RobotModel,
    episodes: &'a [Episode],
    cfg: SimConfig,
    envs: Vec<Env>,
}

impl<'a> EnvPool<'a> {
    pub fn new(robot: &'a RobotModel, episodes: &'a [Episode], n_envs: usize, cfg: SimConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if episodes.is_empty() {
            return Err(Error::EmptyInput("no episodes for the environments"));
        }
        if n_envs == 0 {
            return Err(Error::InvalidConfig("at least one environment is required".into()));
        }
        let mut pool = Self {
            robot,
            episodes,
            cfg,
            envs: Vec::with_capacity(n_envs),
        };
        for i in 0..n_envs {
            let mut rng = ChaCha8Rng::seed_from_u64(hash::stream(seed, i as u64 + 1));
            let (episode, cursor, state) = pool.sample_segment(&mut rng)?;
            pool.envs.push(Env {
                state,
                episode,
                cursor,
                rng,
                resamples: 0,
            });
        }
        Ok(pool)
    }

    pub fn n_envs(&self) -> usize {
        self.envs.len()
    }

    /// Total number of segment resamples across environments.
    pub fn resamples(&self) -> usize {
        self.envs.iter().map(|e| e.resamples).sum()
    }

    fn sample_segment(&self, rng: &mut ChaCha8Rng) -> Result<(usize, usize, HumanoidState)> {
        let episode = rng.random_range(0..self.episodes.len());
        let steps = &self.episodes[episode].steps;
        let span = ((steps.len() - 1) as f64 * self.cfg.max_start_fraction).floor() as usize;
        let cursor = rng.random_range(0..=span);
        let s = &steps[cursor];
        let state = HumanoidState::settled(self.robot, (&s.left_wrist, &s.right_wrist), self.cfg.goal_height(s), &self.cfg)?;
        Ok((episode, cursor, state))
    }

    /// Runs every environment for `horizon` steps under `policy`.
    pub fn rollout(&mut self, policy: &dyn ManagerPolicy, horizon: usize) -> Result<RolloutBatch> {
        let n = self.envs.len();
        let mut per_env: Vec<Vec<RolloutRecord>> = (0..n).map(|_| Vec::with_capacity(horizon)).collect();
        let mut states = Vec::with_capacity(n);
        for _ in 0..horizon {
            states.clear();
            let mut labels = Vec::with_capacity(n);
            for env in &self.envs {
                let s = &self.episodes[env.episode].steps[env.cursor];
                states.push(make_manager_state((&s.left_wrist, &s.right_wrist), &env.state.base));
                let info = PrivilegedInfo::from_base(&env.state.base, self.cfg.goal_height(s));
                labels.push(heuristic_commands(&info));
            }
            let commands = policy.act(&states);
            if commands.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: commands.len(),
                });
            }
            for (i, records) in per_env.iter_mut().enumerate() {
                let mut env = self.envs[i].clone();
                let s = &self.episodes[env.episode].steps[env.cursor];
                let out = advance(
                    self.robot,
                    &mut env.state,
                    &commands[i],
                    (&s.left_wrist, &s.right_wrist),
                    &self.cfg,
                    true,
                    &mut env.rng,
                )?;
                records.push(RolloutRecord {
                    state: states[i],
                    label: labels[i],
                    command: out.command,
                    executed: out.executed,
                    goal: [s.left_wrist, s.right_wrist],
                });
                env.cursor += 1;
                if env.cursor == self.episodes[env.episode].steps.len() {
                    let (episode, cursor, state) = self.sample_segment(&mut env.rng)?;
                    debug!(
                        "env {i}: episode `{}` exhausted, resampled `{}`",
                        self.episodes[env.episode].id, self.episodes[episode].id
                    );
                    env.episode = episode;
                    env.cursor = cursor;
                    env.state = state;
                    env.resamples += 1;
                }
                self.envs[i] = env;
            }
        }
        Ok(RolloutBatch {
            n_envs: n,
            horizon,
            records: per_env.into_iter().flatten().collect(),
        })
    }
}

/// Free-function form of [`EnvPool::rollout`].
pub fn rollout(pool: &mut EnvPool<'_>, policy: &dyn ManagerPolicy, horizon: usize) -> Result<RolloutBatch> {
    pool.rollout(policy, horizon)
}

/// Per-tick record of a full-episode replay.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub episode_id: String,
    pub commands: Vec<LowerBodyCommand>,
    pub bases: Vec<BaseState>,
    pub q_left: Vec<Vec<f64>>,
    pub q_right: Vec<Vec<f64>>,
    pub executed: Vec<[Pose; 2]>,
    pub goals: Vec<[Pose; 2]>,
    pub residuals: Vec<[PoseError; 2]>,
}

/// Seed of the noise stream used when replaying episode `id`.
pub fn episode_seed(seed: u64, id: &str) -> u64 {
    hash::stream(seed, hash::fnv1a(id))
}

/// Replays whole episodes from a fresh state each, batching the policy
/// across episodes tick by tick. Results do not depend on how episodes are
/// grouped into calls.
pub fn replay_episodes(
    robot: &RobotModel,
    episodes: &[&Episode],
    policy: &dyn ManagerPolicy,
    cfg: &SimConfig,
    seed: u64,
    warm_start: bool,
) -> Result<Vec<EpisodeTrace>> {
    cfg.validate()?;
    let mut sims = Vec::with_capacity(episodes.len());
    let mut traces = Vec::with_capacity(episodes.len());
    for ep in episodes {
        let s0 = ep.steps.first().ok_or(Error::EmptyInput("episode has no steps"))?;
        sims.push((
            HumanoidState::settled(robot, (&s0.left_wrist, &s0.right_wrist), cfg.goal_height(s0), cfg)?,
            ChaCha8Rng::seed_from_u64(episode_seed(seed, &ep.id)),
        ));
        let n = ep.steps.len();
        traces.push(EpisodeTrace {
            episode_id: ep.id.clone(),
            commands: Vec::with_capacity(n),
            bases: Vec::with_capacity(n),
            q_left: Vec::with_capacity(n),
            q_right: Vec::with_capacity(n),
            executed: Vec::with_capacity(n),
            goals: Vec::with_capacity(n),
            residuals: Vec::with_capacity(n),
        });
    }
    let longest = episodes.iter().map(|e| e.steps.len()).max().unwrap_or(0);
    let mut active = Vec::new();
    let mut states = Vec::new();
    for t in 0..longest {
        active.clear();
        states.clear();
        for (i, ep) in episodes.iter().enumerate() {
            if let Some(s) = ep.steps.get(t) {
                active.push(i);
                states.push(make_manager_state((&s.left_wrist, &s.right_wrist), &sims[i].0.base));
            }
        }
        let commands = policy.act(&states);
        if commands.len() != states.len() {
            return Err(Error::DimensionMismatch {
                expected: states.len(),
                got: commands.len(),
            });
        }
        for (k, &i) in active.iter().enumerate() {
            let s = &episodes[i].steps[t];
            let (state, rng) = &mut sims[i];
            let out = advance(robot, state, &commands[k], (&s.left_wrist, &s.right_wrist), cfg, warm_start, rng)?;
            let tr = &mut traces[i];
            tr.commands.push(out.command);
            tr.bases.push(state.base);
            tr.q_left.push(state.q_left.clone());
            tr.q_right.push(state.q_right.clone());
            tr.executed.push(out.executed);
            tr.goals.push([s.left_wrist, s.right_wrist]);
            tr.residuals.push(out.residual);
        }
    }
    Ok(traces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::sample_episode;
    use crate::sim::command::COMMAND_RANGES;

    fn home_episode(robot: &RobotModel, n: usize) -> Episode {
        let mut ep = sample_episode("home", n);
        let h = 0.75;
        let st = HumanoidState {
            base: BaseState::at_rest(h),
            q_left: vec![0.0; 7],
            q_right: vec![0.0; 7],
        };
        let [l, r] = st.wrist_poses(robot);
        for s in &mut ep.steps {
            s.left_wrist = l;
            s.right_wrist = r;
            s.goal_height = Some(h);
        }
        ep
    }

    fn drifting_policy(s: &ManagerState) -> LowerBodyCommand {
        LowerBodyCommand::new(2.0, -1.0, 0.3, s.h + 0.5)
    }

    #[test]
    fn single_step_hold() {
        let robot = RobotModel::default();
        let eps = vec![home_episode(&robot, 10)];
        let cfg = SimConfig {
            worker: WorkerModel::default().noiseless(),
            ..SimConfig::default()
        };
        let mut pool = EnvPool::new(&robot, &eps, 1, cfg, 0).unwrap();
        let b = pool.rollout(&HoldPolicy, 1).unwrap();
        assert_eq!(b.len(), 1);
        let r = b.record(0, 0);
        assert_eq!(r.command, LowerBodyCommand::new(0.0, 0.0, 0.0, 0.75));
        assert_eq!(r.label, LowerBodyCommand::new(0.0, 0.0, 0.0, 0.75));
        assert_eq!(pool.envs[0].state.base, BaseState::at_rest(0.75));
    }

    #[test]
    fn batch_shape_and_order() {
        let robot = RobotModel::default();
        let eps = vec![home_episode(&robot, 30), home_episode(&robot, 12)];
        let mut pool = EnvPool::new(&robot, &eps, 4, SimConfig::default(), 3).unwrap();
        let b = pool.rollout(&HoldPolicy, 50).unwrap();
        assert_eq!(b.len(), 200);
        assert!(pool.resamples() > 0);
        let mut pool2 = EnvPool::new(&robot, &eps, 4, SimConfig::default(), 3).unwrap();
        assert_eq!(pool2.rollout(&HoldPolicy, 50).unwrap(), b);
    }

    #[test]
    fn executed_commands_are_clipped() {
        let robot = RobotModel::default();
        let eps = vec![home_episode(&robot, 40)];
        let mut pool = EnvPool::new(&robot, &eps, 3, SimConfig::default(), 1).unwrap();
        let b = pool.rollout(&drifting_policy, 30).unwrap();
        for r in &b.records {
            assert!(r.command.within_limits());
            let a = r.command.to_array();
            assert_eq!(a[0], COMMAND_RANGES[0][1]);
            assert_eq!(a[1], COMMAND_RANGES[1][0]);
        }
    }

    #[test]
    fn replay_residuals_are_honest() {
        let robot = RobotModel::default();
        let mut ep = sample_episode("honest", 20);
        for (k, s) in ep.steps.iter_mut().enumerate() {
            s.left_wrist.position = nalgebra::Vector3::new(0.3, 0.2, 0.8 + 0.01 * k as f64);
            s.right_wrist.position = nalgebra::Vector3::new(0.3, -0.2, 0.8);
        }
        let traces = replay_episodes(&robot, &[&ep], &drifting_policy, &SimConfig::default(), 5, true).unwrap();
        let tr = &traces[0];
        assert_eq!(tr.executed.len(), ep.steps.len());
        for t in 0..ep.len() {
            let b = tr.bases[t].pose();
            let l = compose(
                &b,
                &robot
                    .left_arm
                    .forward_kinematics(&JointVector::new("l", tr.q_left[t].clone()))
                    .unwrap(),
            );
            let e = pose_error(&l, &ep.steps[t].left_wrist);
            assert!((e.pos - tr.residuals[t][0].pos).abs() < 1e-9);
            assert!((e.rot - tr.residuals[t][0].rot).abs() < 1e-9);
        }
    }

    #[test]
    fn home_replay_is_stationary() {
        let robot = RobotModel::default();
        let ep = home_episode(&robot, 20);
        let cfg = SimConfig {
            worker: WorkerModel::default().noiseless(),
            ..SimConfig::default()
        };
        let tr = &replay_episodes(&robot, &[&ep], &HoldPolicy, &cfg, 0, true).unwrap()[0];
        for r in &tr.residuals {
            assert!(r[0].pos < 1e-9 && r[1].pos < 1e-9);
        }
        assert!(tr.q_left.iter().all(|q| q.iter().all(|v| *v == 0.0)));
    }
}
