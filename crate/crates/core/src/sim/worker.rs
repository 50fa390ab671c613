use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::command::LowerBodyCommand;
use crate::error::{Error, Result};

/// Mechanical torso height limits (m).
pub const HEIGHT_HARD_LIMITS: [f64; 2] = [0.10, 1.30];

/// Floating-base state of the humanoid.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BaseState {
    pub x: f64,
    pub y: f64,
    /// Heading in `(-pi, pi]`.
    pub yaw: f64,
    /// Torso height (m).
    pub h: f64,
    /// Realised body-frame velocities.
    pub v_x: f64,
    pub v_y: f64,
    pub v_yaw: f64,
    /// Realised height rate (m/s).
    pub h_rate: f64,
}

impl BaseState {
    pub fn at_rest(h: f64) -> Self {
        Self { h, ..Self::default() }
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

/// Analytic stand-in for the learned lower-body controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorkerModel {
    /// First-order lag time constant of the velocity response (s).
    pub tau_v: f64,
    /// Largest torso height rate (m/s).
    pub height_rate: f64,
    /// Gaussian noise std added to each commanded velocity channel.
    pub noise_std: f64,
    /// Control period (s).
    pub dt: f64,
}

impl Default for WorkerModel {
    fn default() -> Self {
        Self {
            tau_v: 0.2,
            height_rate: 0.5,
            noise_std: 0.02,
            dt: 0.05,
        }
    }
}

impl WorkerModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_v > 0.0 && self.dt > 0.0) {
            return Err(Error::InvalidConfig("worker tau_v and dt must be positive".into()));
        }
        if !(self.height_rate > 0.0) || !(self.noise_std >= 0.0) {
            return Err(Error::InvalidConfig(
                "worker height_rate must be positive and noise_std non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn noiseless(&self) -> Self {
        Self { noise_std: 0.0, ..*self }
    }
}

/// Advances the base by one control period under an already-clipped command.
///
/// Velocities relax toward the (optionally noisy) command with factor
/// `exp(-dt / tau_v)`; the position integrates the new body-frame velocity
/// using the heading at the start of the step; height moves toward the
/// command at most `height_rate * dt`.
pub fn worker_step<R: Rng + ?Sized>(state: &BaseState, cmd: &LowerBodyCommand, model: &WorkerModel, rng: &mut R) -> BaseState {
    let decay = (-model.dt / model.tau_v).exp();
    let mut target = [cmd.v_x, cmd.v_y, cmd.v_yaw];
    if model.noise_std > 0.0 {
        let normal = Normal::new(0.0, model.noise_std).expect("finite noise std");
        for t in &mut target {
            *t += normal.sample(rng);
        }
    }
    let relax = |v: f64, t: f64| t + (v - t) * decay;
    let v_x = relax(state.v_x, target[0]);
    let v_y = relax(state.v_y, target[1]);
    let v_yaw = relax(state.v_yaw, target[2]);

    let (s, c) = state.yaw.sin_cos();
    let x = state.x + (c * v_x - s * v_y) * model.dt;
    let y = state.y + (s * v_x + c * v_y) * model.dt;
    let yaw = wrap_angle(state.yaw + v_yaw * model.dt);

    let max_dh = model.height_rate * model.dt;
    let dh = (cmd.h - state.h).clamp(-max_dh, max_dh);
    let h = (state.h + dh).clamp(HEIGHT_HARD_LIMITS[0], HEIGHT_HARD_LIMITS[1]);
    BaseState {
        x,
        y,
        yaw,
        h,
        v_x,
        v_y,
        v_yaw,
        h_rate: (h - state.h) / model.dt,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_command_from_rest_is_equilibrium() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = BaseState::at_rest(0.7);
        let model = WorkerModel::default().noiseless();
        let next = worker_step(&s, &LowerBodyCommand::new(0.0, 0.0, 0.0, 0.7), &model, &mut rng);
        assert_eq!(next, s);
    }

    #[test]
    fn perfect_tracking_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let model = WorkerModel {
            tau_v: 1e-12,
            noise_std: 0.0,
            dt: 0.05,
            ..WorkerModel::default()
        };
        let mut s = BaseState::at_rest(0.7);
        for _ in 0..20 {
            s = worker_step(&s, &LowerBodyCommand::new(1.0, 0.0, 0.0, 0.7), &model, &mut rng);
        }
        assert!((s.x - 1.0).abs() < 1e-12);
        assert_eq!(s.y, 0.0);
    }

    #[test]
    fn first_order_lag_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let model = WorkerModel {
            tau_v: 0.2,
            noise_std: 0.0,
            ..WorkerModel::default()
        };
        let mut s = BaseState::at_rest(0.7);
        for k in 1..=60 {
            s = worker_step(&s, &LowerBodyCommand::new(1.0, 0.0, 0.0, 0.7), &model, &mut rng);
            let t = k as f64 * model.dt;
            assert!((s.v_x - (1.0 - (-t / 0.2).exp())).abs() < 1e-9);
        }
    }

    #[test]
    fn height_is_rate_limited() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let model = WorkerModel::default().noiseless();
        let s = worker_step(
            &BaseState::at_rest(0.7),
            &LowerBodyCommand::new(0.0, 0.0, 0.0, 0.2),
            &model,
            &mut rng,
        );
        assert!((s.h - (0.7 - 0.025)).abs() < 1e-15);
        assert!((s.h_rate + 0.5).abs() < 1e-12);
    }

    #[test]
    fn yaw_is_wrapped() {
        assert!((wrap_angle(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!((wrap_angle(-std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!((wrap_angle(0.5) - 0.5).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let model = WorkerModel::default();
        let mut s = BaseState::at_rest(0.7);
        for _ in 0..400 {
            s = worker_step(&s, &LowerBodyCommand::new(0.0, 0.0, 1.0, 0.7), &model, &mut rng);
            assert!(s.yaw > -std::f64::consts::PI && s.yaw <= std::f64::consts::PI);
        }
    }

    #[test]
    fn noise_is_seed_deterministic() {
        let model = WorkerModel::default();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = BaseState::at_rest(0.7);
            for _ in 0..10 {
                s = worker_step(&s, &LowerBodyCommand::new(0.3, 0.1, 0.0, 0.7), &model, &mut rng);
            }
            s
        };
        assert_eq!(run(1), run(1));
        assert_ne!(run(1), run(2));
    }
}
