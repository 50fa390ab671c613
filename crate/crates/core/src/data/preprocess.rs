use serde::{Deserialize, Serialize};

use super::episode::Episode;
use crate::error::{Error, Result};

/// Per-axis mean and population standard deviation of wrist positions (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisStats {
    pub mean: [f64; 3],
    pub std: [f64; 3],
    pub count: usize,
}

impl AxisStats {
    fn from_points<'a>(points: impl Iterator<Item = &'a nalgebra::Vector3<f64>>) -> Result<Self> {
        // Welford accumulation per axis
        let mut count = 0usize;
        let mut mean = [0.0f64; 3];
        let mut m2 = [0.0f64; 3];
        for p in points {
            count += 1;
            let n = count as f64;
            for k in 0..3 {
                let delta = p[k] - mean[k];
                mean[k] += delta / n;
                m2[k] += delta * (p[k] - mean[k]);
            }
        }
        if count == 0 {
            return Err(Error::EmptyInput("no wrist positions to summarise"));
        }
        let std = m2.map(|v| (v / count as f64).max(0.0).sqrt());
        Ok(Self { mean, std, count })
    }
}

/// Pooled statistics over both wrists of every step.
pub fn compute_axis_stats(episodes: &[Episode]) -> Result<AxisStats> {
    AxisStats::from_points(
        episodes
            .iter()
            .flat_map(|e| e.steps.iter())
            .flat_map(|s| [&s.left_wrist.position, &s.right_wrist.position]),
    )
}

/// Separate `(left, right)` statistics.
pub fn compute_axis_stats_per_hand(episodes: &[Episode]) -> Result<(AxisStats, AxisStats)> {
    let steps = || episodes.iter().flat_map(|e| e.steps.iter());
    Ok((
        AxisStats::from_points(steps().map(|s| &s.left_wrist.position))?,
        AxisStats::from_points(steps().map(|s| &s.right_wrist.position))?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    /// Lateral (y) scale, the arm-length ratio target/source.
    pub beta: f64,
    /// Height clip range `[lo, hi]` (m).
    pub z_clip: [f64; 2],
    /// Statistics of the target dataset; only the x entries are used.
    pub target: AxisStats,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            beta: 0.6667,
            z_clip: [0.15, 1.25],
            target: AxisStats {
                mean: [0.28, 0.0, 0.85],
                std: [0.05, 0.15, 0.12],
                count: 1,
            },
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidConfig(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.z_clip[0] < self.z_clip[1]) {
            return Err(Error::InvalidConfig(format!(
                "z_clip lower bound {} must be below upper bound {}",
                self.z_clip[0], self.z_clip[1]
            )));
        }
        if !(self.target.std[0] >= 0.0) {
            return Err(Error::InvalidConfig("target x std must be non-negative".into()));
        }
        Ok(())
    }
}

/// Maps source wrist positions into the target workspace: x is z-scored
/// against the source statistics and re-expressed in the target's, y is
/// scaled by `beta`, and z is clipped. Orientations, grips and timing pass
/// through unchanged.
pub fn preprocess_episode(ep: &Episode, src: &AxisStats, cfg: &PreprocessConfig) -> Result<Episode> {
    preprocess_episode_per_hand(ep, src, src, cfg)
}

pub fn preprocess_episode_per_hand(ep: &Episode, src_left: &AxisStats, src_right: &AxisStats, cfg: &PreprocessConfig) -> Result<Episode> {
    cfg.validate()?;
    for s in [src_left, src_right] {
        if !(s.std[0] > 0.0) {
            return Err(Error::Validation(format!(
                "episode `{}`: source x standard deviation is zero",
                ep.id
            )));
        }
    }
    let map = |p: &mut nalgebra::Vector3<f64>, src: &AxisStats| {
        p.x = (p.x - src.mean[0]) / src.std[0] * cfg.target.std[0] + cfg.target.mean[0];
        p.y *= cfg.beta;
        p.z = p.z.clamp(cfg.z_clip[0], cfg.z_clip[1]);
    };
    let mut out = ep.clone();
    for s in &mut out.steps {
        map(&mut s.left_wrist.position, src_left);
        map(&mut s.right_wrist.position, src_right);
    }
    out.provenance.preprocessed = true;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::episode::tests::sample_episode;
    use crate::data::Step;
    use crate::geometry::Pose;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_pass(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        (mean, var.sqrt())
    }

    fn episode_from(points: &[[f64; 3]]) -> Episode {
        let mut ep = sample_episode("p", 2);
        ep.steps = points
            .iter()
            .enumerate()
            .map(|(i, p)| Step {
                t: i as f64,
                left_wrist: Pose::from_translation(p[0], p[1], p[2]),
                right_wrist: Pose::from_translation(p[0], p[1], p[2]),
                left_grip: 0.5,
                right_grip: 0.5,
                goal_height: None,
            })
            .collect();
        ep
    }

    #[test]
    fn singleton_and_two_point_stats() {
        let s = compute_axis_stats(&[episode_from(&[[1.0, 2.0, 3.0]])]).unwrap();
        assert_eq!(s.mean, [1.0, 2.0, 3.0]);
        assert_eq!(s.std, [0.0; 3]);
        let s = compute_axis_stats(&[episode_from(&[[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]])]).unwrap();
        assert_eq!(s.mean[0], 1.0);
        assert_eq!(s.std[0], 1.0);
        assert!(compute_axis_stats(&[]).is_err());
    }

    #[test]
    fn stats_match_two_pass_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut ep = sample_episode("r", 2);
        ep.steps = (0..100)
            .map(|i| Step {
                t: i as f64,
                left_wrist: Pose::from_translation(rng.random_range(-1.0..1.0), rng.random_range(0.0..2.0), rng.random()),
                right_wrist: Pose::from_translation(rng.random_range(-1.0..1.0), rng.random_range(0.0..2.0), rng.random()),
                left_grip: 0.0,
                right_grip: 0.0,
                goal_height: None,
            })
            .collect();
        let s = compute_axis_stats(std::slice::from_ref(&ep)).unwrap();
        for k in 0..3 {
            let xs: Vec<f64> = ep
                .steps
                .iter()
                .flat_map(|st| [st.left_wrist.position[k], st.right_wrist.position[k]])
                .collect();
            let (m, sd) = two_pass(&xs);
            assert!((s.mean[k] - m).abs() < 1e-12);
            assert!((s.std[k] - sd).abs() < 1e-12);
        }
        assert_eq!(s.count, 200);
        let (l, r) = compute_axis_stats_per_hand(std::slice::from_ref(&ep)).unwrap();
        assert_eq!(l.count, 100);
        assert_eq!(r.count, 100);
    }

    #[test]
    fn preprocessing_examples() {
        let cfg = PreprocessConfig::default();
        let src = AxisStats {
            mean: [0.5, 0.0, 0.0],
            std: [0.2, 1.0, 1.0],
            count: 10,
        };
        let ep = episode_from(&[[0.5, 0.30, 1.40], [0.7, -0.3, 0.05]]);
        let out = preprocess_episode(&ep, &src, &cfg).unwrap();
        let p0 = out.steps[0].left_wrist.position;
        assert_eq!(p0.x, cfg.target.mean[0]);
        assert_eq!(p0.z, 1.25);
        assert!((p0.y - 0.20001).abs() < 1e-12);
        let p1 = out.steps[1].right_wrist.position;
        assert!((p1.x - (cfg.target.mean[0] + cfg.target.std[0])).abs() < 1e-15);
        assert_eq!(p1.z, 0.15);
        assert!(out.provenance.preprocessed);
        assert_eq!(out.steps[0].left_wrist.orientation(), ep.steps[0].left_wrist.orientation());
        assert_eq!(out.steps[1].t, ep.steps[1].t);
    }

    #[test]
    fn zero_source_std_is_rejected() {
        let src = AxisStats {
            mean: [0.0; 3],
            std: [0.0, 1.0, 1.0],
            count: 1,
        };
        let ep = episode_from(&[[0.0; 3], [0.0; 3]]);
        assert!(preprocess_episode(&ep, &src, &PreprocessConfig::default()).is_err());
    }

    #[test]
    fn exact_x_stat_transfer_and_z_idempotence() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<[f64; 3]> = (0..64)
            .map(|_| [rng.random_range(0.2..0.9), rng.random_range(-0.5..0.5), rng.random_range(0.0..1.6)])
            .collect();
        let ep = episode_from(&pts);
        let cfg = PreprocessConfig::default();
        let src = compute_axis_stats(std::slice::from_ref(&ep)).unwrap();
        let once = preprocess_episode(&ep, &src, &cfg).unwrap();
        let after = compute_axis_stats(std::slice::from_ref(&once)).unwrap();
        assert!((after.mean[0] - cfg.target.mean[0]).abs() < 1e-9);
        assert!((after.std[0] - cfg.target.std[0]).abs() < 1e-9);
        let twice = preprocess_episode(&once, &after, &cfg).unwrap();
        for (a, b) in once.steps.iter().zip(&twice.steps) {
            assert_eq!(a.left_wrist.position.z, b.left_wrist.position.z);
        }
    }
}
