use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dtw::{aligner_registry, euclidean, Aligner, AlignerConfig};
use super::metrics::{MaeAccumulator, TrackingMetrics};
use crate::dagger::{SplitMetrics, TrainLog, TrainerConfig};
use crate::error::{Error, Result};
use crate::flow::{proprio_state, FlowModel};
use crate::hash;
use crate::pipeline::RetargetedEpisode;

pub const SUMMARY_FILE: &str = "summary.json";
pub const TIMING_FILE: &str = "timing.csv";

/// Final numbers of one manager training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSummary {
    pub mode: String,
    pub iterations: usize,
    pub period: usize,
    pub n_envs: usize,
    pub horizon: usize,
    pub seed: u64,
    pub initial: TrackingMetrics,
    #[serde(rename = "final")]
    pub final_: TrackingMetrics,
    pub split: SplitMetrics,
    pub dataset_size: usize,
}

impl RunSummary {
    pub fn new(cfg: &TrainerConfig, log: &TrainLog) -> Self {
        Self {
            mode: log.mode.clone(),
            iterations: cfg.iterations,
            period: cfg.period,
            n_envs: cfg.n_envs,
            horizon: cfg.horizon,
            seed: cfg.seed,
            initial: log.initial,
            final_: log.final_validation(),
            split: log.split,
            dataset_size: log.dataset_size(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(SUMMARY_FILE);
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n").map_err(|e| Error::file(&path, e))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(SUMMARY_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::file(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRow {
    /// Run directory name.
    pub run: String,
    pub summary: RunSummary,
    /// Total training wall time, when the run recorded one.
    pub wall_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineReport {
    pub rows: Vec<BaselineRow>,
}

fn read_wall_seconds(dir: &Path) -> Option<f64> {
    let text = std::fs::read_to_string(dir.join(TIMING_FILE)).ok()?;
    text.lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().and_then(|v| v.parse::<f64>().ok()))
        .sum()
}

/// Collects the summaries of finished training runs, in the order given.
pub fn compare_baselines(dirs: &[PathBuf]) -> Result<BaselineReport> {
    if dirs.is_empty() {
        return Err(Error::EmptyInput("no run directories"));
    }
    let rows = dirs
        .iter()
        .map(|d| {
            Ok(BaselineRow {
                run: d
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| d.display().to_string()),
                summary: RunSummary::read(d)?,
                wall_seconds: read_wall_seconds(d),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BaselineReport { rows })
}

fn opt2(m: Option<TrackingMetrics>) -> [String; 2] {
    m.map_or([String::new(), String::new()], |m| {
        [format!("{:.4}", m.e_p), format!("{:.4}", m.e_r)]
    })
}

/// Left-aligns the first column and right-aligns the rest.
fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let width: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(String::len).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let cells: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if c == 0 {
                    format!("{s:<w$}", w = width[c])
                } else {
                    format!("{s:>w$}", w = width[c])
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

const BASELINE_COLUMNS: [&str; 13] = [
    "run",
    "mode",
    "period",
    "iterations",
    "e_p_initial",
    "e_p",
    "e_r",
    "e_p_mobile",
    "e_r_mobile",
    "e_p_static",
    "e_r_static",
    "n_mobile_static",
    "dataset_size",
];

impl BaselineReport {
    fn table(&self) -> Vec<Vec<String>> {
        let mut t = vec![BASELINE_COLUMNS.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
        for r in &self.rows {
            let s = &r.summary;
            let [mp, mr] = opt2(s.split.mobile);
            let [sp, sr] = opt2(s.split.static_);
            t.push(vec![
                r.run.clone(),
                s.mode.clone(),
                s.period.to_string(),
                s.iterations.to_string(),
                format!("{:.4}", s.initial.e_p),
                format!("{:.4}", s.final_.e_p),
                format!("{:.4}", s.final_.e_r),
                mp,
                mr,
                sp,
                sr,
                format!("{}/{}", s.split.n_mobile, s.split.n_static),
                s.dataset_size.to_string(),
            ]);
        }
        t
    }

    pub fn to_csv(&self) -> String {
        self.table().iter().map(|r| r.join(",") + "\n").collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# final validation tracking error per run; e_p in cm, e_r in degrees\n");
        out.push_str("# dataset_size = stored (state, label) pairs at the end of training\n");
        out.push_str(&align(&self.table()));
        out
    }

    /// Wall time per run; kept apart because it differs between reruns.
    pub fn timing_csv(&self) -> String {
        let mut out = String::from("run,wall_seconds\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{}\n",
                r.run,
                r.wall_seconds.map(|s| format!("{s:.2}")).unwrap_or_default()
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Registered aligner name, `fast` or `exact`.
    pub aligner: String,
    pub radius: usize,
    pub sample_steps: usize,
    /// Evaluate at most this many episodes (sorted by id).
    pub max_episodes: Option<usize>,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            aligner: "fast".into(),
            radius: 1,
            sample_steps: 4,
            max_episodes: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeEval {
    pub episode_id: String,
    pub task: String,
    pub steps: usize,
    pub tracking: TrackingMetrics,
    /// Accumulated alignment cost divided by warping-path length.
    pub dtw: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub aligner: String,
    pub radius: usize,
    pub rows: Vec<EpisodeEval>,
    /// Pooled over all evaluated steps.
    pub tracking: TrackingMetrics,
    pub mean_dtw: Option<f64>,
}

fn right_arm_dtw(ep: &RetargetedEpisode, model: &FlowModel, aligner: &dyn Aligner, cfg: &EvalConfig) -> Result<f64> {
    let dof = ep.steps[0].action.left_arm.len();
    let scale = &model.codec.action_norm.std[dof..2 * dof];
    let norm = |row: &[f64]| row[dof..2 * dof].iter().zip(scale).map(|(q, s)| q / s).collect::<Vec<f64>>();
    let reference: Vec<Vec<f64>> = ep.steps.iter().map(|s| norm(&s.action.to_vec())).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(hash::stream(cfg.seed, hash::fnv1a(&ep.episode_id)));
    let generated = model.generate(&proprio_state(ep, 0), &ep.instruction, ep.steps.len(), cfg.sample_steps, &mut rng)?;
    let generated: Vec<Vec<f64>> = generated.iter().map(|r| norm(r)).collect();
    let r = aligner.align(&generated, &reference, &euclidean)?;
    Ok(r.distance / r.path.len() as f64)
}

/// Tracking error of retargeted episodes and, given a flow model, DTW
/// between its open-loop right-arm rollouts and the retargeted right arm.
///
/// Joint angles are divided by the per-joint std of the model's training
/// data before the Euclidean pointwise cost is taken.
pub fn evaluate(reps: &[RetargetedEpisode], model: Option<&FlowModel>, cfg: &EvalConfig) -> Result<EvalReport> {
    if reps.is_empty() {
        return Err(Error::EmptyInput("no retargeted episodes to evaluate"));
    }
    let aligner = aligner_registry().build(&cfg.aligner, &AlignerConfig { radius: cfg.radius })?;
    let mut eps: Vec<&RetargetedEpisode> = reps.iter().collect();
    eps.sort_by(|a, b| a.episode_id.cmp(&b.episode_id));
    eps.truncate(cfg.max_episodes.unwrap_or(usize::MAX));
    let rows = eps
        .par_iter()
        .map(|ep| {
            let mut acc = MaeAccumulator::default();
            for s in &ep.steps {
                acc.push(s.residual[0], s.residual[1]);
            }
            let dtw = match model {
                Some(m) => Some(right_arm_dtw(ep, m, aligner.as_ref(), cfg)?),
                None => None,
            };
            Ok(EpisodeEval {
                episode_id: ep.episode_id.clone(),
                task: ep.task.clone(),
                steps: ep.steps.len(),
                tracking: acc.finish()?,
                dtw,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pooled = MaeAccumulator::default();
    for ep in &eps {
        for s in &ep.steps {
            pooled.push(s.residual[0], s.residual[1]);
        }
    }
    let dtws: Vec<f64> = rows.iter().filter_map(|r| r.dtw).collect();
    Ok(EvalReport {
        aligner: cfg.aligner.clone(),
        radius: cfg.radius,
        tracking: pooled.finish()?,
        mean_dtw: (!dtws.is_empty()).then(|| dtws.iter().sum::<f64>() / dtws.len() as f64),
        rows,
    })
}

impl EvalReport {
    fn table(&self) -> Vec<Vec<String>> {
        let dtw = |v: Option<f64>| v.map(|d| format!("{d:.5}")).unwrap_or_default();
        let mut t = vec![["episode", "task", "steps", "e_p", "e_r", "dtw"]
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()];
        for r in &self.rows {
            t.push(vec![
                r.episode_id.clone(),
                r.task.clone(),
                r.steps.to_string(),
                format!("{:.4}", r.tracking.e_p),
                format!("{:.4}", r.tracking.e_r),
                dtw(r.dtw),
            ]);
        }
        t.push(vec![
            "ALL".into(),
            String::new(),
            self.tracking.steps.to_string(),
            format!("{:.4}", self.tracking.e_p),
            format!("{:.4}", self.tracking.e_r),
            dtw(self.mean_dtw),
        ]);
        t
    }

    pub fn to_csv(&self) -> String {
        self.table().iter().map(|r| r.join(",") + "\n").collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# e_p: mean wrist position error (cm); e_r: mean geodesic wrist rotation error (deg)\n");
        out.push_str(&format!(
            "# dtw: {} aligner (radius {}), Euclidean cost over right-arm joints scaled by per-joint training std, \
             divided by warping-path length\n",
            self.aligner, self.radius
        ));
        out.push_str(&align(&self.table()));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dagger::IterationLog;

    fn summary(mode: &str, size: usize) -> RunSummary {
        let m = |e: f64| TrackingMetrics {
            e_p: e,
            e_r: 2.0 * e,
            ..TrackingMetrics::default()
        };
        let log = TrainLog {
            mode: mode.into(),
            initial: m(40.0),
            records: vec![IterationLog {
                iteration: 0,
                l_rollout: 1.0,
                l_da: None,
                dataset_size: size,
                validation: Some(m(1.5)),
                seconds: 0.25,
            }],
            split: SplitMetrics {
                mobile: Some(m(3.0)),
                static_: None,
                n_mobile: 2,
                n_static: 0,
            },
            validation_ids: vec![],
        };
        RunSummary::new(&TrainerConfig::default(), &log)
    }

    #[test]
    fn one_run_passes_through() {
        let dir = tempfile::tempdir().unwrap();
        let run = dir.path().join("harmonized");
        std::fs::create_dir_all(&run).unwrap();
        let s = summary("harmonized", 16000);
        s.write(&run).unwrap();
        std::fs::write(run.join(TIMING_FILE), "iteration,seconds\n0,1.5\n1,2.0\n").unwrap();
        let rep = compare_baselines(std::slice::from_ref(&run)).unwrap();
        assert_eq!(rep.rows.len(), 1);
        assert_eq!(rep.rows[0].summary, s);
        assert_eq!(rep.rows[0].wall_seconds, Some(3.5));
        let csv = rep.to_csv();
        assert!(csv
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("harmonized,harmonized,10,200,40.0000,1.5000,3.0000,3.0000,6.0000,,,2/0,16000"));
        assert_eq!(rep.to_text(), compare_baselines(&[run]).unwrap().to_text());
        assert!(compare_baselines(&[dir.path().join("missing")]).is_err());
    }

    #[test]
    fn text_columns_align() {
        let dir = tempfile::tempdir().unwrap();
        let mut dirs = vec![];
        for (name, size) in [("a", 16000), ("standard-dagger", 160000)] {
            let d = dir.path().join(name);
            std::fs::create_dir_all(&d).unwrap();
            summary(name, size).write(&d).unwrap();
            dirs.push(d);
        }
        let text = compare_baselines(&dirs).unwrap().to_text();
        let lines: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(lines.len(), 3);
        assert!(lines.iter().all(|l| l.len() == lines[0].len()));
    }
}
