//! Offline hierarchical retargeting of preprocessed episodes and triplet export.

mod export;
mod hand;
mod retarget;

pub use export::{export_triplets, manifest_path, read_manifest, read_triplets, ResidualStats, TripletManifest, MANIFEST_SCHEMA_VERSION};
pub use hand::{map_gripper, HandKeyframes};
pub use retarget::{
    hierarchical_step, resample, retarget_episode, retarget_episodes, RetargetConfig, RetargetedEpisode, RetargetedStep, WholeBodyAction,
    TRIPLET_SCHEMA_VERSION,
};
