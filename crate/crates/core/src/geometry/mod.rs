//! Rigid poses, kinematic chains and closed-loop inverse kinematics.

mod chain;
mod clik;
mod pose;

pub use chain::{ChainConfig, Joint, JointConfig, JointVector, KinematicChain, CHAIN_SCHEMA_VERSION};
pub use clik::{clik_solve, IkConfig, IkSolution};
pub use pose::{compose, pose_error, Pose, PoseError};
