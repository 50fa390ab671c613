use nalgebra::{Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::pose::{compose, Pose};
use crate::error::{Error, Result};

/// Version of the chain config schema understood by [`KinematicChain::from_config`].
pub const CHAIN_SCHEMA_VERSION: u32 = 1;

/// A revolute joint: fixed offset from the parent frame, then rotation about `axis`.
#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    pub axis: Unit<Vector3<f64>>,
    pub offset: Pose,
    pub lower: f64,
    pub upper: f64,
}

/// Serial chain of revolute joints ending in a fixed tool frame.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicChain {
    id: String,
    joints: Vec<Joint>,
    tool: Pose,
}

/// Joint positions (rad) tagged with the chain they belong to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointVector {
    pub chain: String,
    pub values: Vec<f64>,
}

impl JointVector {
    pub fn new(chain: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            chain: chain.into(),
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseConfig {
    #[serde(default)]
    pub position: [f64; 3],
    #[serde(default = "identity_wxyz")]
    pub orientation: [f64; 4],
}

fn identity_wxyz() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

impl Default for PoseConfig {
    fn default() -> Self {
        Self {
            position: [0.0; 3],
            orientation: identity_wxyz(),
        }
    }
}

impl From<&PoseConfig> for Pose {
    fn from(c: &PoseConfig) -> Self {
        Pose::from_parts(c.position, c.orientation)
    }
}

impl From<&Pose> for PoseConfig {
    fn from(p: &Pose) -> Self {
        Self {
            position: [p.position.x, p.position.y, p.position.z],
            orientation: p.wxyz(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointConfig {
    pub name: String,
    pub axis: [f64; 3],
    #[serde(default)]
    pub offset: PoseConfig,
    pub limits: [f64; 2],
}

/// Plain-text (TOML) chain description. See `configs/humanoid.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub schema_version: u32,
    pub id: String,
    #[serde(default)]
    pub tool: PoseConfig,
    pub joints: Vec<JointConfig>,
}

impl KinematicChain {
    pub fn new(id: impl Into<String>, joints: Vec<Joint>, tool: Pose) -> Result<Self> {
        let id = id.into();
        if joints.is_empty() {
            return Err(Error::InvalidConfig(format!("chain `{id}` has no joints")));
        }
        for j in &joints {
            if !(j.lower < j.upper) {
                return Err(Error::InvalidConfig(format!(
                    "joint `{}` of chain `{id}`: lower limit {} must be below upper {}",
                    j.name, j.lower, j.upper
                )));
            }
        }
        Ok(Self { id, joints, tool })
    }

    pub fn from_config(cfg: &ChainConfig) -> Result<Self> {
        if cfg.schema_version != CHAIN_SCHEMA_VERSION {
            return Err(Error::InvalidConfig(format!(
                "chain `{}`: unsupported schema_version {} (expected {CHAIN_SCHEMA_VERSION})",
                cfg.id, cfg.schema_version
            )));
        }
        let mut joints = Vec::with_capacity(cfg.joints.len());
        for jc in &cfg.joints {
            let axis = Vector3::from(jc.axis);
            let norm = axis.norm();
            if !norm.is_finite() || norm < 1e-9 {
                return Err(Error::InvalidConfig(format!("joint `{}` has a zero axis", jc.name)));
            }
            joints.push(Joint {
                name: jc.name.clone(),
                axis: Unit::new_normalize(axis),
                offset: Pose::from(&jc.offset),
                lower: jc.limits[0],
                upper: jc.limits[1],
            });
        }
        Self::new(cfg.id.clone(), joints, Pose::from(&cfg.tool))
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ChainConfig = toml::from_str(s)?;
        Self::from_config(&cfg)
    }

    pub fn to_config(&self) -> ChainConfig {
        ChainConfig {
            schema_version: CHAIN_SCHEMA_VERSION,
            id: self.id.clone(),
            tool: PoseConfig::from(&self.tool),
            joints: self
                .joints
                .iter()
                .map(|j| JointConfig {
                    name: j.name.clone(),
                    axis: [j.axis.x, j.axis.y, j.axis.z],
                    offset: PoseConfig::from(&j.offset),
                    limits: [j.lower, j.upper],
                })
                .collect(),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn tool(&self) -> &Pose {
        &self.tool
    }

    /// All-zero configuration clamped into the limits.
    pub fn zero_configuration(&self) -> JointVector {
        let mut q = JointVector::new(self.id.clone(), vec![0.0; self.dof()]);
        self.clamp(&mut q.values);
        q
    }

    pub fn clamp(&self, q: &mut [f64]) {
        for (v, j) in q.iter_mut().zip(&self.joints) {
            *v = v.clamp(j.lower, j.upper);
        }
    }

    pub fn within_limits(&self, q: &[f64]) -> bool {
        q.len() == self.dof() && q.iter().zip(&self.joints).all(|(v, j)| *v >= j.lower && *v <= j.upper)
    }

    fn check_len(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dof() {
            return Err(Error::DimensionMismatch {
                expected: self.dof(),
                got: q.len(),
            });
        }
        Ok(())
    }

    /// End-effector pose in the chain base frame.
    pub fn forward_kinematics(&self, q: &JointVector) -> Result<Pose> {
        self.check_len(&q.values)?;
        Ok(self.fk_raw(&q.values))
    }

    pub(crate) fn fk_raw(&self, q: &[f64]) -> Pose {
        let mut frame = Pose::identity();
        for (j, &angle) in self.joints.iter().zip(q) {
            frame = compose(&frame, &j.offset);
            let rot = UnitQuaternion::from_axis_angle(&j.axis, angle);
            frame = Pose::new(frame.position, *frame.orientation() * rot);
        }
        compose(&frame, &self.tool)
    }

    /// End-effector pose plus the geometric Jacobian (rows: linear xyz, angular xyz).
    pub(crate) fn fk_with_jacobian(&self, q: &[f64], jac: &mut Vec<[f64; 6]>) -> Pose {
        jac.clear();
        let mut frame = Pose::identity();
        let mut origins = Vec::with_capacity(self.joints.len());
        for (j, &angle) in self.joints.iter().zip(q) {
            frame = compose(&frame, &j.offset);
            let world_axis = frame.orientation() * j.axis.into_inner();
            origins.push((frame.position, world_axis));
            let rot = UnitQuaternion::from_axis_angle(&j.axis, angle);
            frame = Pose::new(frame.position, *frame.orientation() * rot);
        }
        let ee = compose(&frame, &self.tool);
        for (origin, axis) in origins {
            let lin = axis.cross(&(ee.position - origin));
            jac.push([lin.x, lin.y, lin.z, axis.x, axis.y, axis.z]);
        }
        ee
    }
}
