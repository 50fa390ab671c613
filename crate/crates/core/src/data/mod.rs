//! Episode data model, file I/O, source-to-target normalisation,
//! workspace statistics and synthetic seed generation.

mod episode;
mod heatmap;
mod io;
mod preprocess;
mod seeds;

pub use episode::{AugmentationInfo, Episode, Provenance, Step};
pub use heatmap::{workspace_heatmap, DensityGrid, HandHeatmaps, Plane};
pub use io::{read_episodes, read_episodes_lenient, write_episodes, Exclusion};
pub(crate) use io::{read_jsonl, write_jsonl};
pub use preprocess::{
    compute_axis_stats, compute_axis_stats_per_hand, preprocess_episode, preprocess_episode_per_hand, AxisStats, PreprocessConfig,
};
pub use seeds::{generate_synthetic_seeds, MotionFamily, SeedSpec, WorkspaceBox};

#[cfg(test)]
pub(crate) use episode::tests::sample_episode;
