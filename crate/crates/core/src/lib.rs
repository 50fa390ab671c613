//! Retargeting of dual-arm end-effector trajectories onto a whole-body
//! humanoid.
//!
//! The crate is organised as a pipeline:
//!
//! * [`geometry`]: rigid poses, kinematic chains, forward kinematics and the
//!   closed-loop IK arm policy.
//! * [`data`]: episode model, file I/O, source-to-target normalisation,
//!   workspace heatmaps and synthetic seed generation.
//! * [`interp`]: PCHIP curves and height augmentation of seed episodes.
//! * [`sim`]: kinematic floating-base humanoid environments, heuristic
//!   command labels and parallel rollouts.
//! * [`nn`]: dense networks with analytic gradients and Adam.
//! * [`dagger`]: manager-policy training (harmonised online DAgger and its
//!   baselines), selected by name from a schedule registry.
//! * [`pipeline`]: offline hierarchical retargeting and triplet export.
//! * [`flow`]: flow-matching action-chunk head and its few-step sampler.
//! * [`eval`]: tracking MAE, exact/Fast DTW and baseline reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dagger;
pub mod data;
pub mod error;
pub mod eval;
pub mod flow;
pub mod geometry;
mod hash;
pub mod interp;
pub mod nn;
pub mod pipeline;
pub mod registry;
pub mod sim;

pub use error::{Error, Result};
