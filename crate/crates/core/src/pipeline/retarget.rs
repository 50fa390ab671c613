use rand::Rng;
use serde::{Deserialize, Serialize};

use super::hand::map_gripper;
use crate::data::{Episode, Step};
use crate::error::{Error, Result};
use crate::eval::{traces_mae, TrackingMetrics};
use crate::geometry::{Pose, PoseError};
use crate::sim::{
    advance, make_manager_state, replay_episodes, BaseState, EpisodeTrace, HumanoidState, LowerBodyCommand, ManagerPolicy, RobotModel,
    SimConfig,
};

pub const TRIPLET_SCHEMA_VERSION: u32 = 1;

/// Whole-body target for one control tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WholeBodyAction {
    pub left_arm: Vec<f64>,
    pub right_arm: Vec<f64>,
    pub left_hand: Vec<f64>,
    pub right_hand: Vec<f64>,
    pub command: LowerBodyCommand,
}

impl WholeBodyAction {
    /// `[left arm, right arm, left hand, right hand, (v_x, v_y, v_yaw, h)]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.left_arm.len() * 2 + self.left_hand.len() * 2 + 4);
        v.extend(&self.left_arm);
        v.extend(&self.right_arm);
        v.extend(&self.left_hand);
        v.extend(&self.right_hand);
        v.extend(self.command.to_array());
        v
    }

    /// Joint limits, hand limits and command ranges all hold.
    pub fn is_feasible(&self, robot: &RobotModel) -> bool {
        robot.left_arm.within_limits(&self.left_arm)
            && robot.right_arm.within_limits(&self.right_arm)
            && robot.left_hand.within_limits(&self.left_hand)
            && robot.right_hand.within_limits(&self.right_hand)
            && self.command.within_limits()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetargetedStep {
    pub t: f64,
    pub action: WholeBodyAction,
    /// Base state after executing the command.
    pub base: BaseState,
    pub goal: [Pose; 2],
    /// Realised wrist poses in the world frame.
    pub realized: [Pose; 2],
    pub residual: [PoseError; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetargetedEpisode {
    pub schema_version: u32,
    pub episode_id: String,
    pub task: String,
    pub instruction: String,
    #[serde(default)]
    pub vision_refs: Vec<String>,
    pub source_embodiment: String,
    pub target_embodiment: String,
    pub frequency: f64,
    pub steps: Vec<RetargetedStep>,
    pub summary: TrackingMetrics,
}

impl RetargetedEpisode {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != TRIPLET_SCHEMA_VERSION {
            return Err(Error::Validation(format!(
                "unsupported triplet schema_version {}",
                self.schema_version
            )));
        }
        if self.steps.is_empty() {
            return Err(Error::Validation(format!("retargeted episode `{}` has no steps", self.episode_id)));
        }
        let dims = |a: &WholeBodyAction| (a.left_arm.len(), a.right_arm.len(), a.left_hand.len(), a.right_hand.len());
        let d0 = dims(&self.steps[0].action);
        if self.steps.iter().any(|s| dims(&s.action) != d0) {
            return Err(Error::Validation(format!("episode `{}` mixes action dimensions", self.episode_id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetargetConfig {
    pub sim: SimConfig,
    /// Control rate (Hz); episodes at other rates are resampled first.
    pub control_rate: f64,
    pub warm_start: bool,
    pub target_embodiment: String,
    pub seed: u64,
}

impl Default for RetargetConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            control_rate: 20.0,
            warm_start: true,
            target_embodiment: "humanoid-29dof".into(),
            seed: 0,
        }
    }
}

/// Resamples an episode to `rate` Hz: linear in position, grip and goal
/// height; slerp in orientation.
pub fn resample(ep: &Episode, rate: f64) -> Result<Episode> {
    if !(rate > 0.0) {
        return Err(Error::InvalidConfig("control rate must be positive".into()));
    }
    if (ep.frequency - rate).abs() < 1e-9 {
        return Ok(ep.clone());
    }
    let steps = &ep.steps;
    let (t0, t1) = (steps[0].t, steps[steps.len() - 1].t);
    let n = ((t1 - t0) * rate + 1e-9).floor() as usize + 1;
    let lerp = |a: f64, b: f64, u: f64| a + (b - a) * u;
    let pose = |a: &Pose, b: &Pose, u: f64| Pose::new(a.position.lerp(&b.position, u), a.orientation().slerp(b.orientation(), u));
    let mut out = ep.clone();
    out.frequency = rate;
    out.steps = Vec::with_capacity(n);
    let mut k = 0;
    for i in 0..n {
        let t = t0 + i as f64 / rate;
        while k + 2 < steps.len() && steps[k + 1].t <= t {
            k += 1;
        }
        let (a, b) = (&steps[k], &steps[k + 1]);
        let u = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
        out.steps.push(Step {
            t: t - t0 + steps[0].t,
            left_wrist: pose(&a.left_wrist, &b.left_wrist, u),
            right_wrist: pose(&a.right_wrist, &b.right_wrist, u),
            left_grip: lerp(a.left_grip, b.left_grip, u),
            right_grip: lerp(a.right_grip, b.right_grip, u),
            goal_height: match (a.goal_height, b.goal_height) {
                (Some(x), Some(y)) => Some(lerp(x, y, u)),
                _ => None,
            },
        });
    }
    Ok(out)
}

/// One tick of the composite model: manager on the current state, worker
/// on the clipped command, IK arms on the goals in the new base frame, and
/// the grip openings mapped onto the hands.
pub fn hierarchical_step<R: Rng + ?Sized>(
    robot: &RobotModel,
    goal: &Step,
    state: &mut HumanoidState,
    manager: &dyn ManagerPolicy,
    cfg: &RetargetConfig,
    rng: &mut R,
) -> Result<(WholeBodyAction, [PoseError; 2])> {
    let s = make_manager_state((&goal.left_wrist, &goal.right_wrist), &state.base);
    let cmd = manager
        .act(std::slice::from_ref(&s))
        .into_iter()
        .next()
        .ok_or(Error::EmptyInput("manager returned no command"))?;
    let out = advance(
        robot,
        state,
        &cmd,
        (&goal.left_wrist, &goal.right_wrist),
        &cfg.sim,
        cfg.warm_start,
        rng,
    )?;
    let action = WholeBodyAction {
        left_arm: state.q_left.clone(),
        right_arm: state.q_right.clone(),
        left_hand: map_gripper(goal.left_grip, &robot.left_hand)?.values,
        right_hand: map_gripper(goal.right_grip, &robot.right_hand)?.values,
        command: out.command,
    };
    Ok((action, out.residual))
}

fn assemble(robot: &RobotModel, ep: &Episode, source: &Episode, trace: EpisodeTrace, cfg: &RetargetConfig) -> Result<RetargetedEpisode> {
    let summary = traces_mae(std::iter::once(&trace))?;
    let mut steps = Vec::with_capacity(ep.steps.len());
    for (t, s) in ep.steps.iter().enumerate() {
        steps.push(RetargetedStep {
            t: s.t,
            action: WholeBodyAction {
                left_arm: trace.q_left[t].clone(),
                right_arm: trace.q_right[t].clone(),
                left_hand: map_gripper(s.left_grip, &robot.left_hand)?.values,
                right_hand: map_gripper(s.right_grip, &robot.right_hand)?.values,
                command: trace.commands[t],
            },
            base: trace.bases[t],
            goal: trace.goals[t],
            realized: trace.executed[t],
            residual: trace.residuals[t],
        });
    }
    Ok(RetargetedEpisode {
        schema_version: TRIPLET_SCHEMA_VERSION,
        episode_id: source.id.clone(),
        task: source.task.clone(),
        instruction: source.instruction.clone(),
        vision_refs: source.vision_refs.clone(),
        source_embodiment: source.embodiment.clone(),
        target_embodiment: cfg.target_embodiment.clone(),
        frequency: ep.frequency,
        steps,
        summary,
    })
}

/// Retargets episodes independently, each from a fresh simulator state,
/// returning them sorted by episode id. The manager is evaluated on all
/// episodes together each tick; results match one-at-a-time retargeting.
pub fn retarget_episodes(
    eps: &[Episode],
    manager: &dyn ManagerPolicy,
    robot: &RobotModel,
    cfg: &RetargetConfig,
) -> Result<Vec<RetargetedEpisode>> {
    let mut order: Vec<&Episode> = eps.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));
    let mut resampled = Vec::with_capacity(order.len());
    for ep in &order {
        if !ep.provenance.preprocessed {
            return Err(Error::NotPreprocessed(ep.id.clone()));
        }
        ep.validate()?;
        resampled.push(resample(ep, cfg.control_rate)?);
    }
    let refs: Vec<&Episode> = resampled.iter().collect();
    let traces = replay_episodes(robot, &refs, manager, &cfg.sim, cfg.seed, cfg.warm_start)?;
    traces
        .into_iter()
        .zip(resampled.iter().zip(order))
        .map(|(tr, (ep, src))| assemble(robot, ep, src, tr, cfg))
        .collect()
}

pub fn retarget_episode(ep: &Episode, manager: &dyn ManagerPolicy, robot: &RobotModel, cfg: &RetargetConfig) -> Result<RetargetedEpisode> {
    let mut out = retarget_episodes(std::slice::from_ref(ep), manager, robot, cfg)?;
    Ok(out.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::sample_episode;
    use crate::geometry::{compose, pose_error};
    use crate::sim::{HoldPolicy, WorkerModel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn noiseless() -> RetargetConfig {
        RetargetConfig {
            sim: SimConfig {
                worker: WorkerModel::default().noiseless(),
                ..SimConfig::default()
            },
            ..RetargetConfig::default()
        }
    }

    fn home(robot: &RobotModel, n: usize) -> Episode {
        let st = HumanoidState {
            base: BaseState::at_rest(0.75),
            q_left: vec![0.0; 7],
            q_right: vec![0.0; 7],
        };
        let [l, r] = st.wrist_poses(robot);
        let mut ep = sample_episode("home", n);
        ep.frequency = 20.0;
        for (k, s) in ep.steps.iter_mut().enumerate() {
            s.t = k as f64 * 0.05;
            s.left_wrist = l;
            s.right_wrist = r;
            s.goal_height = Some(0.75);
        }
        ep.provenance.preprocessed = true;
        ep
    }

    #[test]
    fn hierarchical_fixed_point() {
        let robot = RobotModel::default();
        let ep = home(&robot, 3);
        let mut state = HumanoidState {
            base: BaseState::at_rest(0.75),
            q_left: vec![0.0; 7],
            q_right: vec![0.0; 7],
        };
        let before = state.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (a, res) = hierarchical_step(&robot, &ep.steps[0], &mut state, &HoldPolicy, &noiseless(), &mut rng).unwrap();
        assert_eq!(state, before);
        assert_eq!(a.left_arm, vec![0.0; 7]);
        assert!(res[0].pos < 1e-12 && res[1].pos < 1e-12);
        assert!(a.is_feasible(&robot));
    }

    #[test]
    fn stationary_episode_and_alignment() {
        let robot = RobotModel::default();
        let ep = home(&robot, 25);
        let r = retarget_episode(&ep, &HoldPolicy, &robot, &noiseless()).unwrap();
        assert_eq!(r.steps.len(), ep.steps.len());
        assert!(r.summary.e_p < 1e-9);
        assert!(r.steps.iter().all(|s| s.action.is_feasible(&robot)));
    }

    #[test]
    fn unpreprocessed_is_rejected() {
        let robot = RobotModel::default();
        let mut ep = home(&robot, 5);
        ep.provenance.preprocessed = false;
        assert!(matches!(
            retarget_episode(&ep, &HoldPolicy, &robot, &noiseless()),
            Err(Error::NotPreprocessed(_))
        ));
    }

    #[test]
    fn batch_matches_single_and_residuals_are_honest() {
        let robot = RobotModel::default();
        let mut eps = Vec::new();
        for i in 0..3 {
            let mut ep = home(&robot, 10 + i);
            ep.id = format!("ep-{i}");
            for (k, s) in ep.steps.iter_mut().enumerate() {
                s.left_wrist.position.z += 0.02 * k as f64;
                s.right_wrist.position.x += 0.01 * (k + i) as f64;
            }
            eps.push(ep);
        }
        let cfg = RetargetConfig::default();
        let drift = |s: &crate::sim::ManagerState| LowerBodyCommand::new(0.1, 0.05, 0.1, s.h - 0.1);
        let batch = retarget_episodes(&eps, &drift, &robot, &cfg).unwrap();
        for (ep, b) in eps.iter().zip(&batch) {
            assert_eq!(&retarget_episode(ep, &drift, &robot, &cfg).unwrap(), b);
            for s in &b.steps {
                let base = s.base.pose();
                let l = compose(&base, &robot.left_arm.fk_raw(&s.action.left_arm));
                let e = pose_error(&l, &s.goal[0]);
                assert!((e.pos - s.residual[0].pos).abs() < 1e-9 && (e.rot - s.residual[0].rot).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn resample_to_control_rate() {
        let robot = RobotModel::default();
        let mut ep = home(&robot, 11);
        ep.frequency = 10.0;
        for (k, s) in ep.steps.iter_mut().enumerate() {
            s.t = k as f64 * 0.1;
            s.left_grip = k as f64 / 10.0;
        }
        let r = resample(&ep, 20.0).unwrap();
        assert_eq!(r.steps.len(), 21);
        assert!((r.steps[1].left_grip - 0.05).abs() < 1e-12);
        assert!((r.steps[20].t - 1.0).abs() < 1e-12);
        r.validate().unwrap();
    }
}
