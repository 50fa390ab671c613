use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{pose_error, Pose, PoseError};
use crate::sim::EpisodeTrace;

/// Mean absolute position (cm) and rotation (deg) error.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HandMetrics {
    pub e_p: f64,
    pub e_r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrackingMetrics {
    /// Mean over steps and both hands, cm.
    pub e_p: f64,
    /// Mean over steps and both hands, degrees.
    pub e_r: f64,
    pub left: HandMetrics,
    pub right: HandMetrics,
    pub steps: usize,
}

const CM: f64 = 100.0;

/// Accumulates per-step errors of both hands.
#[derive(Debug, Clone, Default)]
pub struct MaeAccumulator {
    sum: [[f64; 2]; 2],
    steps: usize,
}

impl MaeAccumulator {
    pub fn push(&mut self, left: PoseError, right: PoseError) {
        for (k, e) in [left, right].into_iter().enumerate() {
            self.sum[k][0] += e.pos;
            self.sum[k][1] += e.rot;
        }
        self.steps += 1;
    }

    pub fn finish(&self) -> Result<TrackingMetrics> {
        if self.steps == 0 {
            return Err(Error::EmptyInput("no steps to average"));
        }
        let n = self.steps as f64;
        let hand = |k: usize| HandMetrics {
            e_p: self.sum[k][0] / n * CM,
            e_r: self.sum[k][1] / n * 180.0 / std::f64::consts::PI,
        };
        let (left, right) = (hand(0), hand(1));
        Ok(TrackingMetrics {
            e_p: 0.5 * (left.e_p + right.e_p),
            e_r: 0.5 * (left.e_r + right.e_r),
            left,
            right,
            steps: self.steps,
        })
    }
}

/// Tracking MAE between executed and goal streams of both wrists.
pub fn tracking_mae(executed: (&[Pose], &[Pose]), goal: (&[Pose], &[Pose])) -> Result<TrackingMetrics> {
    let n = executed.0.len();
    for len in [executed.1.len(), goal.0.len(), goal.1.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, got: len });
        }
    }
    let mut acc = MaeAccumulator::default();
    for t in 0..n {
        acc.push(pose_error(&executed.0[t], &goal.0[t]), pose_error(&executed.1[t], &goal.1[t]));
    }
    acc.finish()
}

/// Pooled MAE over every step of every trace.
pub fn traces_mae<'a>(traces: impl IntoIterator<Item = &'a EpisodeTrace>) -> Result<TrackingMetrics> {
    let mut acc = MaeAccumulator::default();
    for tr in traces {
        for r in &tr.residuals {
            acc.push(r[0], r[1]);
        }
    }
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_and_constant_offset() {
        let g: Vec<Pose> = (0..5).map(|i| Pose::from_translation(i as f64, 0.0, 1.0)).collect();
        let m = tracking_mae((&g, &g), (&g, &g)).unwrap();
        assert_eq!((m.e_p, m.e_r), (0.0, 0.0));
        let off: Vec<Pose> = g.iter().map(|p| Pose::from_translation(p.position.x, 0.02, 1.0)).collect();
        let m = tracking_mae((&off, &off), (&g, &g)).unwrap();
        assert!((m.e_p - 2.0).abs() < 1e-12);
        assert_eq!(m.e_r, 0.0);
        assert_eq!(m.steps, 5);
    }

    #[test]
    fn one_radian_in_degrees() {
        let g = vec![Pose::identity(); 3];
        let r = vec![Pose::from_axis_angle(Vector3::zeros(), Vector3::x(), 1.0); 3];
        let m = tracking_mae((&r, &r), (&g, &g)).unwrap();
        assert!((m.e_r - 57.2958).abs() < 1e-4);
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pose = |rng: &mut ChaCha8Rng| {
            Pose::from_axis_angle(
                Vector3::new(rng.random(), rng.random(), rng.random()),
                Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 1.0),
                rng.random_range(-3.0..3.0),
            )
        };
        let streams: Vec<Vec<Pose>> = (0..4).map(|_| (0..37).map(|_| pose(&mut rng)).collect()).collect();
        let m = tracking_mae((&streams[0], &streams[1]), (&streams[2], &streams[3])).unwrap();
        let (mut p, mut r) = (0.0, 0.0);
        for t in 0..37 {
            for (a, b) in [(&streams[0][t], &streams[2][t]), (&streams[1][t], &streams[3][t])] {
                p += (a.position - b.position).norm();
                let rel = a.orientation().inverse() * b.orientation();
                r += rel.angle();
            }
        }
        assert!((m.e_p - p / 74.0 * 100.0).abs() < 1e-9);
        assert!((m.e_r - (r / 74.0).to_degrees()).abs() < 1e-9);
    }

    #[test]
    fn length_mismatch() {
        let g = vec![Pose::identity(); 3];
        assert!(tracking_mae((&g[..2], &g[..2]), (&g, &g)).is_err());
    }
}
