//! One function per subcommand. Every stage writes into `out/<stage>`
//! together with a snapshot of the resolved config and a log.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use retarget_core::dagger::{train_manager, ManagerNet, TrainerConfig};
use retarget_core::data::{
    compute_axis_stats, generate_synthetic_seeds, preprocess_episode, read_episodes, workspace_heatmap, write_episodes, AxisStats, Episode,
    HandHeatmaps,
};
use retarget_core::eval::{compare_baselines, evaluate, RunSummary, TIMING_FILE};
use retarget_core::flow::{load_checkpoint, train_flow, FlowDataset};
use retarget_core::interp::augment_heights;
use retarget_core::nn::{load_net, save_net};
use retarget_core::pipeline::{export_triplets, read_triplets, retarget_episodes};
use retarget_core::sim::{RobotModel, DEFAULT_ROBOT_TOML};
use retarget_core::{Error, Result};
use serde::Serialize;

use crate::config::RunConfig;
use crate::logging;

pub const EPISODES_FILE: &str = "episodes.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANAGER_FILE: &str = "manager.bin";
pub const TRIPLETS_FILE: &str = "triplets.jsonl";
pub const CONFIG_SNAPSHOT: &str = "config.toml";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::File {
        path: path.to_path_buf(),
        source: e,
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

/// Creates the stage directory, snapshots the config and starts its log.
fn stage_dir(cfg: &RunConfig, stage: &str) -> Result<PathBuf> {
    let dir = cfg.out.join(stage);
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    write_text(&dir.join(CONFIG_SNAPSHOT), &cfg.to_toml()?)?;
    let log = dir.join("log.txt");
    logging::attach_file(&log).map_err(io_err(&log))?;
    info!("{stage}: writing to {}", dir.display());
    Ok(dir)
}

fn input(over: &Option<PathBuf>, cfg: &RunConfig, stage: &str, file: &str) -> PathBuf {
    over.clone().unwrap_or_else(|| cfg.out.join(stage).join(file))
}

fn robot(cfg: &RunConfig) -> Result<RobotModel> {
    match &cfg.paths.robot {
        Some(p) => RobotModel::from_toml_str(&std::fs::read_to_string(p).map_err(io_err(p))?),
        None => RobotModel::from_toml_str(DEFAULT_ROBOT_TOML),
    }
}

#[derive(Serialize)]
struct EpisodeManifest {
    episodes: usize,
    steps: usize,
    per_task: BTreeMap<String, usize>,
    stats: AxisStats,
}

fn episode_manifest(eps: &[Episode]) -> Result<EpisodeManifest> {
    let mut per_task = BTreeMap::new();
    for e in eps {
        *per_task.entry(e.task.clone()).or_insert(0) += 1;
    }
    Ok(EpisodeManifest {
        episodes: eps.len(),
        steps: eps.iter().map(|e| e.steps.len()).sum(),
        per_task,
        stats: compute_axis_stats(eps)?,
    })
}

fn write_heatmaps(maps: &HandHeatmaps, dir: &Path, prefix: &str) -> Result<()> {
    maps.left.write_csv(dir.join(format!("{prefix}_left.csv")))?;
    maps.right.write_csv(dir.join(format!("{prefix}_right.csv")))
}

pub fn gen_seeds(cfg: &RunConfig) -> Result<()> {
    let dir = stage_dir(cfg, "seeds")?;
    let eps = generate_synthetic_seeds(&cfg.seeds, cfg.seed)?;
    write_episodes(&eps, dir.join(EPISODES_FILE))?;
    write_json(&dir.join(MANIFEST_FILE), &episode_manifest(&eps)?)?;
    info!("generated {} seed episodes", eps.len());
    Ok(())
}

pub fn preprocess(cfg: &RunConfig) -> Result<()> {
    let src = read_episodes(input(&cfg.paths.seeds, cfg, "seeds", EPISODES_FILE))?;
    let dir = stage_dir(cfg, "preprocess")?;
    let stats = compute_axis_stats(&src)?;
    let out = src
        .iter()
        .map(|e| preprocess_episode(e, &stats, &cfg.preprocess))
        .collect::<Result<Vec<_>>>()?;
    write_episodes(&out, dir.join(EPISODES_FILE))?;
    write_json(&dir.join(MANIFEST_FILE), &episode_manifest(&out)?)?;
    let h = &cfg.heatmap;
    let grid = (h.grid[0], h.grid[1]);
    write_heatmaps(&workspace_heatmap(&src, h.plane, grid, h.bandwidth)?, &dir, "heatmap_source")?;
    write_heatmaps(&workspace_heatmap(&out, h.plane, grid, h.bandwidth)?, &dir, "heatmap_target")?;
    info!(
        "preprocessed {} episodes (source x mean {:.4}, std {:.4})",
        out.len(),
        stats.mean[0],
        stats.std[0]
    );
    Ok(())
}

pub fn augment(cfg: &RunConfig) -> Result<()> {
    let src = read_episodes(input(&cfg.paths.preprocessed, cfg, "preprocess", EPISODES_FILE))?;
    let dir = stage_dir(cfg, "augment")?;
    let mut out = Vec::with_capacity(src.len() * cfg.augment.variants);
    for ep in &src {
        out.extend(augment_heights(ep, &cfg.augment)?.into_iter().map(|v| v.episode));
    }
    write_episodes(&out, dir.join(EPISODES_FILE))?;
    write_json(&dir.join(MANIFEST_FILE), &episode_manifest(&out)?)?;
    info!("augmented {} episodes into {}", src.len(), out.len());
    Ok(())
}

pub fn train_managers(cfg: &RunConfig) -> Result<()> {
    let eps = read_episodes(input(&cfg.paths.augmented, cfg, "augment", EPISODES_FILE))?;
    let robot = robot(cfg)?;
    let root = stage_dir(cfg, "train-manager")?;
    for mode in &cfg.train_manager.modes {
        let tcfg = TrainerConfig {
            mode: mode.clone(),
            ..cfg.trainer.clone()
        };
        let dir = root.join(mode);
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let started = Instant::now();
        let (manager, log) = train_manager(&tcfg, &eps, &robot, &cfg.sim)?;
        save_net(&manager.net, &dir.join(MANAGER_FILE))?;
        log.write_csv(&dir.join("train_log.csv"))?;
        write_text(&dir.join(TIMING_FILE), &log.timing_csv())?;
        let summary = RunSummary::new(&tcfg, &log);
        summary.write(&dir)?;
        info!(
            "{mode}: E_p {:.4} cm (initial {:.4}), |D| = {}, {:.1} s",
            summary.final_.e_p,
            summary.initial.e_p,
            summary.dataset_size,
            started.elapsed().as_secs_f64()
        );
    }
    Ok(())
}

pub fn retarget(cfg: &RunConfig) -> Result<()> {
    let eps = read_episodes(input(&cfg.paths.preprocessed, cfg, "preprocess", EPISODES_FILE))?;
    let manager_path = cfg
        .paths
        .manager
        .clone()
        .unwrap_or_else(|| cfg.out.join("train-manager").join(&cfg.retarget.manager_mode).join(MANAGER_FILE));
    let manager = ManagerNet::from_net(load_net(&manager_path)?)?;
    let robot = robot(cfg)?;
    let dir = stage_dir(cfg, "retarget")?;
    let reps = retarget_episodes(&eps, &manager, &robot, &cfg.retarget_config())?;
    let manifest = export_triplets(&reps, &dir.join(TRIPLETS_FILE))?;
    info!(
        "retargeted {} episodes, {} steps: E_p {:.4} cm, E_r {:.4} deg",
        manifest.episodes, manifest.steps, manifest.tracking.e_p, manifest.tracking.e_r
    );
    Ok(())
}

pub fn train_flow_stage(cfg: &RunConfig) -> Result<()> {
    let reps = read_triplets(&input(&cfg.paths.triplets, cfg, "retarget", TRIPLETS_FILE))?;
    let data = FlowDataset::from_episodes(&reps)?;
    let dir = stage_dir(cfg, "train-flow")?;
    info!(
        "flow dataset: {} chunks, action dim {}, {} tasks",
        data.len(),
        data.action_dim(),
        data.tasks().len()
    );
    let state = train_flow(&data, &cfg.flow, Some(&dir))?;
    let tail = &state.losses[state.losses.len().saturating_sub(50)..];
    info!(
        "flow training done: mean loss over last {} steps {:.5}",
        tail.len(),
        tail.iter().sum::<f64>() / tail.len().max(1) as f64
    );
    Ok(())
}

pub fn eval(cfg: &RunConfig) -> Result<()> {
    let reps = read_triplets(&input(&cfg.paths.triplets, cfg, "retarget", TRIPLETS_FILE))?;
    let model_dir = cfg
        .paths
        .flow_model
        .clone()
        .unwrap_or_else(|| cfg.out.join("train-flow").join("model"));
    let model = load_checkpoint(&model_dir)?.model;
    let dir = stage_dir(cfg, "eval")?;
    let report = evaluate(&reps, Some(&model), &cfg.eval)?;
    write_text(&dir.join("eval.csv"), &report.to_csv())?;
    write_text(&dir.join("eval.txt"), &report.to_text())?;
    write_json(&dir.join("eval.json"), &report)?;
    info!(
        "eval: E_p {:.4} cm, E_r {:.4} deg, DTW {:.5}",
        report.tracking.e_p,
        report.tracking.e_r,
        report.mean_dtw.unwrap_or(f64::NAN)
    );
    Ok(())
}

pub fn report(cfg: &RunConfig) -> Result<()> {
    let root = cfg.out.join("train-manager");
    let mut runs: Vec<PathBuf> = std::fs::read_dir(&root)
        .map_err(io_err(&root))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(retarget_core::eval::SUMMARY_FILE).is_file())
        .collect();
    runs.sort();
    let baselines = compare_baselines(&runs)?;
    let eval_text = std::fs::read_to_string(cfg.out.join("eval").join("eval.txt")).ok();
    let dir = stage_dir(cfg, "report")?;
    write_text(&dir.join("baselines.csv"), &baselines.to_csv())?;
    write_text(&dir.join(TIMING_FILE), &baselines.timing_csv())?;
    let mut text = String::from("## manager training\n");
    text.push_str(&baselines.to_text());
    if let Some(e) = eval_text {
        text.push_str("\n## retargeted data and flow head\n");
        text.push_str(&e);
    }
    write_text(&dir.join("report.txt"), &text)?;
    print!("{text}");
    Ok(())
}
