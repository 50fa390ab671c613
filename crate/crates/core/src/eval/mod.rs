//! Tracking error metrics, trajectory similarity and run comparison reports.

mod dtw;
mod metrics;
mod report;

pub use dtw::{aligner_registry, dtw_exact, dtw_fast, euclidean, Aligner, AlignerConfig, DtwResult, Metric};
pub use metrics::{traces_mae, tracking_mae, HandMetrics, MaeAccumulator, TrackingMetrics};
pub use report::{
    compare_baselines, evaluate, BaselineReport, BaselineRow, EpisodeEval, EvalConfig, EvalReport, RunSummary, SUMMARY_FILE, TIMING_FILE,
};
