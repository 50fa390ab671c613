//! Kinematic humanoid simulator: an analytic stand-in for the lower-body
//! controller, IK arms, privileged labels and batched rollouts.

mod command;
mod env;
mod robot;
mod state;
mod worker;

pub use command::{LowerBodyCommand, COMMAND_RANGES, HEIGHT_RANGE, VX_RANGE, VYAW_RANGE, VY_RANGE};
pub use env::{
    advance, episode_seed, replay_episodes, rollout, EnvPool, EpisodeTrace, HoldPolicy, HumanoidState, ManagerPolicy, RolloutBatch,
    RolloutRecord, SimConfig, TickOutcome,
};
pub use robot::{RobotConfig, RobotModel, DEFAULT_ROBOT_TOML, ROBOT_SCHEMA_VERSION};
pub use state::{heuristic_commands, make_manager_state, ManagerState, PrivilegedInfo, HEURISTIC_HORIZON, STATE_DIM};
pub use worker::{worker_step, wrap_angle, BaseState, WorkerModel, HEIGHT_HARD_LIMITS};
