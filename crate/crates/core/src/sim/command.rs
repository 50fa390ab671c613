use serde::{Deserialize, Serialize};

/// Command clip ranges `[lo, hi]` per channel.
pub const VX_RANGE: [f64; 2] = [-0.8, 1.2];
pub const VY_RANGE: [f64; 2] = [-0.5, 0.5];
pub const VYAW_RANGE: [f64; 2] = [-1.0, 1.0];
pub const HEIGHT_RANGE: [f64; 2] = [0.15, 1.25];

/// Ranges in channel order `(v_x, v_y, v_yaw, h)`.
pub const COMMAND_RANGES: [[f64; 2]; 4] = [VX_RANGE, VY_RANGE, VYAW_RANGE, HEIGHT_RANGE];

/// Lower-body command for the worker: planar body-frame velocities and torso height.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowerBodyCommand {
    /// Forward velocity, m/s.
    pub v_x: f64,
    /// Lateral velocity, m/s.
    pub v_y: f64,
    /// Yaw rate, rad/s.
    pub v_yaw: f64,
    /// Torso height, m.
    pub h: f64,
}

impl LowerBodyCommand {
    pub fn new(v_x: f64, v_y: f64, v_yaw: f64, h: f64) -> Self {
        Self { v_x, v_y, v_yaw, h }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.v_x, self.v_y, self.v_yaw, self.h]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn clipped(&self) -> Self {
        let a = self.to_array();
        Self::from_array(std::array::from_fn(|i| a[i].clamp(COMMAND_RANGES[i][0], COMMAND_RANGES[i][1])))
    }

    pub fn within_limits(&self) -> bool {
        self.to_array().iter().zip(COMMAND_RANGES).all(|(v, [lo, hi])| *v >= lo && *v <= hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_ranges() {
        let c = LowerBodyCommand::new(1.5, -0.7, 2.0, 0.05).clipped();
        assert_eq!(c, LowerBodyCommand::new(1.2, -0.5, 1.0, 0.15));
        assert!(c.within_limits());
        let c = LowerBodyCommand::new(-1.0, 0.7, -3.0, 2.0).clipped();
        assert_eq!(c, LowerBodyCommand::new(-0.8, 0.5, -1.0, 1.25));
        let inside = LowerBodyCommand::new(0.1, 0.2, -0.3, 0.7);
        assert_eq!(inside.clipped(), inside);
    }
}
