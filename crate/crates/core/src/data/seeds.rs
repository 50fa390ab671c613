use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::episode::{Episode, Provenance, Step};
use crate::error::{Error, Result};
use crate::geometry::Pose;

/// Axis-aligned box for the left wrist; the right wrist uses its mirror in y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkspaceBox {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub z: [f64; 2],
}

impl WorkspaceBox {
    fn mirrored(&self) -> Self {
        Self {
            x: self.x,
            y: [-self.y[1], -self.y[0]],
            z: self.z,
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vector3<f64> {
        Vector3::new(
            rng.random_range(self.x[0]..=self.x[1]),
            rng.random_range(self.y[0]..=self.y[1]),
            rng.random_range(self.z[0]..=self.z[1]),
        )
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (self.x[0]..=self.x[1]).contains(&p.x) && (self.y[0]..=self.y[1]).contains(&p.y) && (self.z[0]..=self.z[1]).contains(&p.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionFamily {
    /// One hand reaches out and returns; the other holds.
    Reach,
    /// Both hands move through a via point.
    Transfer,
    /// One hand traces a horizontal circle.
    CircularWipe,
}

impl MotionFamily {
    fn task(self) -> (&'static str, &'static str) {
        match self {
            MotionFamily::Reach => ("reach", "reach for the object and bring the hand back"),
            MotionFamily::Transfer => ("transfer", "move the object across the table with both hands"),
            MotionFamily::CircularWipe => ("wipe", "wipe the table surface in circles"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeedSpec {
    pub count: usize,
    /// Seconds per episode.
    pub duration: f64,
    /// Hz.
    pub frequency: f64,
    pub workspace: WorkspaceBox,
    /// Upper bound on wrist speed (m/s).
    pub v_max: f64,
    /// Families assigned round-robin by episode index.
    pub families: Vec<MotionFamily>,
    /// Fraction of episodes tagged as dexterous-hand (rest are grippers).
    pub hand_fraction: f64,
    pub embodiment: String,
    /// Largest wrist tilt away from the neutral orientation (rad).
    pub max_tilt: f64,
}

impl Default for SeedSpec {
    fn default() -> Self {
        Self {
            count: 50,
            duration: 5.0,
            frequency: 20.0,
            workspace: WorkspaceBox {
                x: [0.35, 0.75],
                y: [0.08, 0.45],
                z: [0.65, 1.05],
            },
            v_max: 0.4,
            families: vec![MotionFamily::Reach, MotionFamily::Transfer, MotionFamily::CircularWipe],
            hand_fraction: 0.15,
            embodiment: "wheeled-dual-arm".into(),
            max_tilt: 0.3,
        }
    }
}

impl SeedSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(format!("seed spec: {m}")));
        if self.count == 0 {
            return bad("count must be at least 1".into());
        }
        if !(self.duration > 0.0 && self.frequency > 0.0) {
            return bad("duration and frequency must be positive".into());
        }
        if self.duration * self.frequency < 1.0 {
            return bad("episode must span at least two samples".into());
        }
        for (name, r) in [("x", self.workspace.x), ("y", self.workspace.y), ("z", self.workspace.z)] {
            if !(r[0] < r[1]) || !r[0].is_finite() || !r[1].is_finite() {
                return bad(format!("workspace {name} range [{}, {}] is empty", r[0], r[1]));
            }
        }
        if !(self.v_max > 0.0) {
            return bad("v_max must be positive".into());
        }
        if self.families.is_empty() {
            return bad("at least one motion family is required".into());
        }
        if !(0.0..=1.0).contains(&self.hand_fraction) {
            return bad("hand_fraction must be in [0, 1]".into());
        }
        if !(self.max_tilt >= 0.0) {
            return bad("max_tilt must be non-negative".into());
        }
        Ok(())
    }

    fn steps(&self) -> usize {
        (self.duration * self.frequency).round() as usize + 1
    }
}

/// Minimum-jerk blend from `a` to `b`, `s` in `[0, 1]`.
fn min_jerk(a: &Vector3<f64>, b: &Vector3<f64>, s: f64) -> Vector3<f64> {
    let s = s.clamp(0.0, 1.0);
    let w = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
    a + (b - a) * w
}

/// Pulls `b` toward `a` so a min-jerk move over `seg` seconds respects `v_max`.
fn limit_distance(a: &Vector3<f64>, b: &Vector3<f64>, seg: f64, v_max: f64) -> Vector3<f64> {
    let max_d = 0.95 * v_max * seg / 1.875;
    let d = (b - a).norm();
    if d > max_d {
        a + (b - a) * (max_d / d)
    } else {
        *b
    }
}

struct HandPlan {
    path: Box<dyn Fn(f64) -> Vector3<f64>>,
    grip: Box<dyn Fn(f64) -> f64>,
}

fn hold(p: Vector3<f64>, grip: f64) -> HandPlan {
    HandPlan {
        path: Box::new(move |_| p),
        grip: Box::new(move |_| grip),
    }
}

/// Smooth step of the grip between `from` and `to` centred at `at` (fraction of duration).
fn grip_switch(from: f64, to: f64, at: f64, width: f64) -> impl Fn(f64) -> f64 {
    move |s: f64| {
        let x = ((s - at) / width + 0.5).clamp(0.0, 1.0);
        from + (to - from) * (0.5 - 0.5 * (std::f64::consts::PI * x).cos())
    }
}

fn plan_hand(family: MotionFamily, active: bool, bx: &WorkspaceBox, spec: &SeedSpec, rng: &mut ChaCha8Rng) -> HandPlan {
    let t = spec.duration;
    let p0 = bx.sample(rng);
    match family {
        MotionFamily::Reach if active => {
            let p1 = limit_distance(&p0, &bx.sample(rng), 0.4 * t, spec.v_max);
            let close = grip_switch(1.0, 0.1, 0.5, 0.15);
            HandPlan {
                path: Box::new(move |s| {
                    if s < 0.4 {
                        min_jerk(&p0, &p1, s / 0.4)
                    } else if s < 0.6 {
                        p1
                    } else {
                        min_jerk(&p1, &p0, (s - 0.6) / 0.4)
                    }
                }),
                grip: Box::new(close),
            }
        }
        MotionFamily::Transfer => {
            let p1 = limit_distance(&p0, &bx.sample(rng), 0.5 * t, spec.v_max);
            let p2 = limit_distance(&p1, &bx.sample(rng), 0.5 * t, spec.v_max);
            let g1 = grip_switch(1.0, 0.1, 0.5, 0.1);
            let g2 = grip_switch(0.0, 0.9, 0.95, 0.1);
            HandPlan {
                path: Box::new(move |s| {
                    if s < 0.5 {
                        min_jerk(&p0, &p1, s / 0.5)
                    } else {
                        min_jerk(&p1, &p2, (s - 0.5) / 0.5)
                    }
                }),
                grip: Box::new(move |s| g1(s) + g2(s)),
            }
        }
        MotionFamily::CircularWipe if active => {
            let half_x = 0.5 * (bx.x[1] - bx.x[0]);
            let half_y = 0.5 * (bx.y[1] - bx.y[0]);
            let r = rng.random_range(0.03..0.10f64).min(half_x).min(half_y);
            let cx = rng.random_range(bx.x[0] + r..=bx.x[1] - r);
            let cy = rng.random_range(bx.y[0] + r..=bx.y[1] - r);
            let cz = p0.z;
            let turns = rng.random_range(1.0..3.0f64);
            let omega = (2.0 * std::f64::consts::PI * turns / t).min(0.95 * spec.v_max / r.max(1e-9));
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            HandPlan {
                path: Box::new(move |s| {
                    let a = phase + omega * s * t;
                    Vector3::new(cx + r * a.cos(), cy + r * a.sin(), cz)
                }),
                grip: Box::new(|_| 0.2),
            }
        }
        _ => hold(p0, 1.0),
    }
}

fn tilt_profile(spec: &SeedSpec, rng: &mut ChaCha8Rng) -> impl Fn(f64) -> UnitQuaternion<f64> {
    let half = 0.5 * spec.max_tilt;
    let axis = Vector3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    let base = if axis.norm() > 1e-6 && half > 0.0 {
        UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(axis), rng.random_range(0.0..=half))
    } else {
        UnitQuaternion::identity()
    };
    let amp = rng.random_range(0.0..=half);
    move |s: f64| {
        let yaw = amp * (std::f64::consts::TAU * s).sin();
        base * UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw)
    }
}

/// Generates smooth dual-wrist episodes inside the workspace box.
/// Episode `i` draws from its own stream derived from `(rng_seed, i)`.
pub fn generate_synthetic_seeds(spec: &SeedSpec, rng_seed: u64) -> Result<Vec<Episode>> {
    spec.validate()?;
    let right_box = spec.workspace.mirrored();
    let n = spec.steps();
    let mut out = Vec::with_capacity(spec.count);
    for i in 0..spec.count {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let family = spec.families[i % spec.families.len()];
        let left_active = rng.random_bool(0.5);
        let left = plan_hand(family, left_active, &spec.workspace, spec, &mut rng);
        let right = plan_hand(family, !left_active, &right_box, spec, &mut rng);
        let left_rot = tilt_profile(spec, &mut rng);
        let right_rot = tilt_profile(spec, &mut rng);
        let is_hand = rng.random_bool(spec.hand_fraction);
        let (task, instruction) = family.task();
        let id = format!("seed-{i:04}");
        let steps = (0..n)
            .map(|k| {
                let t = k as f64 / spec.frequency;
                let s = (t / spec.duration).min(1.0);
                Step {
                    t,
                    left_wrist: Pose::new((left.path)(s), left_rot(s)),
                    right_wrist: Pose::new((right.path)(s), right_rot(s)),
                    left_grip: (left.grip)(s).clamp(0.0, 1.0),
                    right_grip: (right.grip)(s).clamp(0.0, 1.0),
                    goal_height: None,
                }
            })
            .collect();
        out.push(Episode {
            vision_refs: ["head", "wrist_left", "wrist_right"].iter().map(|c| format!("{id}/{c}")).collect(),
            id,
            task: task.into(),
            instruction: instruction.into(),
            frequency: spec.frequency,
            embodiment: format!("{}/{}", spec.embodiment, if is_hand { "hand" } else { "gripper" }),
            provenance: Provenance::default(),
            steps,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_for_seed() {
        let spec = SeedSpec {
            count: 6,
            ..SeedSpec::default()
        };
        let a = generate_synthetic_seeds(&spec, 9).unwrap();
        let b = generate_synthetic_seeds(&spec, 9).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic_seeds(&spec, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn stays_inside_box() {
        let mut spec = SeedSpec::default();
        spec.workspace.z = [0.6, 0.9];
        let eps = generate_synthetic_seeds(&spec, 1).unwrap();
        let right = spec.workspace.mirrored();
        for ep in &eps {
            ep.validate().unwrap();
            for s in &ep.steps {
                assert!(spec.workspace.contains(&s.left_wrist.position), "{:?}", s.left_wrist.position);
                assert!(right.contains(&s.right_wrist.position));
                assert!((0.6..=0.9).contains(&s.left_wrist.position.z));
            }
        }
    }

    #[test]
    fn displacement_bounded_by_vmax() {
        let spec = SeedSpec::default();
        let eps = generate_synthetic_seeds(&spec, 2).unwrap();
        assert_eq!(eps.len(), 50);
        let dt = 1.0 / spec.frequency;
        for ep in &eps {
            for w in ep.steps.windows(2) {
                let dl = (w[1].left_wrist.position - w[0].left_wrist.position).norm();
                let dr = (w[1].right_wrist.position - w[0].right_wrist.position).norm();
                assert!(dl <= spec.v_max * dt + 1e-12 && dr <= spec.v_max * dt + 1e-12, "{dl} {dr}");
            }
        }
    }

    #[test]
    fn invalid_spec_rejected() {
        let mut spec = SeedSpec::default();
        spec.workspace.z = [0.9, 0.6];
        assert!(generate_synthetic_seeds(&spec, 0).is_err());
        let spec = SeedSpec {
            count: 0,
            ..SeedSpec::default()
        };
        assert!(generate_synthetic_seeds(&spec, 0).is_err());
    }
}
