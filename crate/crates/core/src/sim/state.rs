use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::command::LowerBodyCommand;
use super::worker::BaseState;
use crate::geometry::{compose, Pose};

/// Number of features in a [`ManagerState`].
pub const STATE_DIM: usize = 15;

/// Manager input: both wrist goals in the current base frame plus torso height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManagerState {
    pub left: Pose,
    pub right: Pose,
    pub h: f64,
}

impl ManagerState {
    /// Flattened as `[l.p(3), l.q(4), r.p(3), r.q(4), h]` with quaternions in `wxyz` order.
    pub fn features(&self) -> [f64; STATE_DIM] {
        let mut f = [0.0; STATE_DIM];
        for (k, pose) in [&self.left, &self.right].into_iter().enumerate() {
            let o = 7 * k;
            f[o..o + 3].copy_from_slice(pose.position.as_slice());
            f[o + 3..o + 7].copy_from_slice(&pose.wxyz());
        }
        f[14] = self.h;
        f
    }
}

impl BaseState {
    /// Base frame: origin at `(x, y, h)`, rotated by `yaw` about world z.
    pub fn pose(&self) -> Pose {
        Pose::from_yaw(Vector3::new(self.x, self.y, self.h), self.yaw)
    }
}

/// Expresses world-frame wrist goals in the frame of `base`.
pub fn make_manager_state(goal: (&Pose, &Pose), base: &BaseState) -> ManagerState {
    let inv = base.pose().inverse();
    ManagerState {
        left: compose(&inv, goal.0),
        right: compose(&inv, goal.1),
        h: base.h,
    }
}

/// Simulator-only quantities used to label states.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PrivilegedInfo {
    /// Goal torso height `h*(t)`.
    pub goal_height: f64,
    /// Planar base displacement from the episode-initial base, expressed in the current base frame.
    pub dp: [f64; 2],
    /// Heading change since the start of the episode.
    pub dtheta: f64,
}

impl PrivilegedInfo {
    /// Displacement of `base` from the episode-initial frame (world origin, zero yaw).
    pub fn from_base(base: &BaseState, goal_height: f64) -> Self {
        let (s, c) = base.yaw.sin_cos();
        Self {
            goal_height,
            dp: [c * base.x + s * base.y, -s * base.x + c * base.y],
            dtheta: base.yaw,
        }
    }
}

/// Planning horizon over which the displacement is undone (s).
pub const HEURISTIC_HORIZON: f64 = 1.0;

/// Expert label: cancel the base displacement over one horizon and track the goal height.
pub fn heuristic_commands(info: &PrivilegedInfo) -> LowerBodyCommand {
    LowerBodyCommand::new(
        -info.dp[0] / HEURISTIC_HORIZON,
        -info.dp[1] / HEURISTIC_HORIZON,
        -info.dtheta / HEURISTIC_HORIZON,
        info.goal_height,
    )
    .clipped()
}
