use nalgebra::{Quaternion, Rotation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Rigid transform: translation in metres plus a unit quaternion.
///
/// The quaternion is kept in canonical form (`w >= 0`) so equal rotations
/// have equal representations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    orientation: UnitQuaternion<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            position: Vector3::zeros(),
            orientation: UnitQuaternion::identity(),
        }
    }

    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            position,
            orientation: canonical(orientation),
        }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self::new(Vector3::new(x, y, z), UnitQuaternion::identity())
    }

    /// Builds a pose from raw `(w, x, y, z)` quaternion components, normalising them.
    pub fn from_parts(position: [f64; 3], wxyz: [f64; 4]) -> Self {
        let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        Self::new(Vector3::from(position), UnitQuaternion::new_unchecked(q))
    }

    pub fn from_axis_angle(position: Vector3<f64>, axis: Vector3<f64>, angle: f64) -> Self {
        let rot = UnitQuaternion::from_axis_angle(&Unit::new_normalize(axis), angle);
        Self::new(position, rot)
    }

    /// Pure yaw rotation about +z located at `position`.
    pub fn from_yaw(position: Vector3<f64>, yaw: f64) -> Self {
        Self::new(position, UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw))
    }

    pub fn orientation(&self) -> &UnitQuaternion<f64> {
        &self.orientation
    }

    pub fn set_orientation(&mut self, q: UnitQuaternion<f64>) {
        self.orientation = canonical(q);
    }

    /// Quaternion as `[w, x, y, z]`.
    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.orientation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn rotation_matrix(&self) -> Rotation3<f64> {
        self.orientation.to_rotation_matrix()
    }

    pub fn inverse(&self) -> Self {
        let inv = self.orientation.inverse();
        Self::new(-(inv * self.position), inv)
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.position + self.orientation * p
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite()) && self.wxyz().iter().all(|v| v.is_finite())
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

fn canonical(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    // renormalising an already-unit quaternion can perturb the last bit,
    // which would break lossless file round trips
    let norm = q.quaternion().norm();
    let q = if (norm - 1.0).abs() > 1e-12 {
        UnitQuaternion::new_normalize(*q.quaternion())
    } else {
        q
    };
    if q.quaternion().w < 0.0 {
        UnitQuaternion::new_unchecked(-*q.quaternion())
    } else {
        q
    }
}

/// `a` followed by `b` expressed in `a`'s frame.
pub fn compose(a: &Pose, b: &Pose) -> Pose {
    Pose::new(a.position + a.orientation * b.position, a.orientation * b.orientation)
}

/// Translational and geodesic rotational distance between two poses.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseError {
    /// Euclidean distance, metres.
    pub pos: f64,
    /// Angle of the relative rotation, radians in `[0, pi]`.
    pub rot: f64,
}

pub fn pose_error(current: &Pose, target: &Pose) -> PoseError {
    let pos = (target.position - current.position).norm();
    let rel = current.orientation.inverse() * target.orientation;
    let q = rel.quaternion();
    let rot = 2.0 * q.imag().norm().atan2(q.w.abs());
    PoseError { pos, rot }
}

/// Wire form: `{"p": [x, y, z], "q": [w, x, y, z]}`.
#[derive(Serialize, Deserialize)]
struct PoseRepr {
    p: [f64; 3],
    q: [f64; 4],
}

impl Serialize for Pose {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        PoseRepr {
            p: [self.position.x, self.position.y, self.position.z],
            q: self.wxyz(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = PoseRepr::deserialize(deserializer)?;
        let norm = repr.q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm < 1e-12 || repr.p.iter().any(|v| !v.is_finite()) {
            return Err(serde::de::Error::custom("pose must be finite with a nonzero quaternion"));
        }
        Ok(Pose::from_parts(repr.p, repr.q))
    }
}
