//! Manager-policy training: harmonised online DAgger and its baselines.
//!
//! A [`TrainingSchedule`] chosen by name decides when rollouts are
//! aggregated into the dataset and which losses are stepped. With `K`
//! iterations and period `M` the harmonised schedule aggregates at
//! iterations `0, M, 2M, ...`, so the dataset holds `ceil(K / M) * N * T`
//! pairs at the end.

mod dataset;
mod policy;
mod schedule;
mod trainer;

pub use dataset::{da_loss, AggregatedDataset};
pub use policy::{rollout_loss, LossWeights, ManagerNet};
pub use schedule::{build_schedule, schedule_registry, Harmonized, Online, StandardDagger, TrainingSchedule};
pub use trainer::{
    is_mobile, split_validation, train_manager, train_manager_with, train_on_dataset, IterationLog, Observer, SplitMetrics, TrainLog,
    TrainerConfig, LOG_HEADER,
};
