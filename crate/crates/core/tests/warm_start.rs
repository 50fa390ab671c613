//! Warm-starting the per-tick IK from the previous solution is meant as an
//! optimisation: on the standard fixture the tracking summary with and
//! without it must agree within 10%.

use retarget_core::dagger::{train_manager, TrainerConfig};
use retarget_core::data::{compute_axis_stats, generate_synthetic_seeds, preprocess_episode, Episode, PreprocessConfig, SeedSpec};
use retarget_core::interp::{augment_heights, HeightAugmentSpec};
use retarget_core::pipeline::{retarget_episodes, RetargetConfig};
use retarget_core::sim::{RobotModel, SimConfig};

/// Mirrors `configs/standard.toml` after seed propagation.
const SEED: u64 = 7;

#[test]
fn warm_start_changes_tracking_little() {
    let seeds = generate_synthetic_seeds(&SeedSpec::default(), SEED).unwrap();
    let stats = compute_axis_stats(&seeds).unwrap();
    let pre: Vec<Episode> = seeds
        .iter()
        .map(|e| preprocess_episode(e, &stats, &PreprocessConfig::default()).unwrap())
        .collect();
    let spec = HeightAugmentSpec {
        variants: 4,
        seed: SEED,
        ..HeightAugmentSpec::default()
    };
    let mut augmented = Vec::new();
    for ep in &pre {
        augmented.extend(augment_heights(ep, &spec).unwrap().into_iter().map(|v| v.episode));
    }
    let cfg = TrainerConfig {
        n_envs: 16,
        horizon: 50,
        iterations: 200,
        period: 10,
        da_batch: 1024,
        da_max_minibatches: Some(8),
        validation_episodes: 32,
        validate_every: 20,
        seed: SEED,
        ..TrainerConfig::default()
    };
    let robot = RobotModel::default();
    let (manager, _) = train_manager(&cfg, &augmented, &robot, &SimConfig::default()).unwrap();

    let summary = |warm_start: bool| {
        let rcfg = RetargetConfig {
            warm_start,
            seed: SEED,
            ..RetargetConfig::default()
        };
        let reps = retarget_episodes(&pre, &manager, &robot, &rcfg).unwrap();
        let n = reps.len() as f64;
        (
            reps.iter().map(|r| r.summary.e_p).sum::<f64>() / n,
            reps.iter().map(|r| r.summary.e_r).sum::<f64>() / n,
        )
    };
    let (warm, cold) = (summary(true), summary(false));
    eprintln!(
        "warm start: E_p {:.5} cm, E_r {:.5} deg; cold start: E_p {:.5} cm, E_r {:.5} deg",
        warm.0, warm.1, cold.0, cold.1
    );
    assert!(
        (warm.0 - cold.0).abs() < 0.1 * warm.0.max(cold.0),
        "E_p {:.5} vs {:.5}",
        warm.0,
        cold.0
    );
    assert!(
        (warm.1 - cold.1).abs() < 0.1 * warm.1.max(cold.1),
        "E_r {:.5} vs {:.5}",
        warm.1,
        cold.1
    );
}
