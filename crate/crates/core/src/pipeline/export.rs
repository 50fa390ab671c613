use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::retarget::{RetargetedEpisode, TRIPLET_SCHEMA_VERSION};
use crate::data::{read_jsonl, write_jsonl};
use crate::error::{Error, Result};
use crate::eval::{MaeAccumulator, TrackingMetrics};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidualStats {
    pub mean: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripletManifest {
    pub schema_version: u32,
    pub triplet_schema_version: u32,
    pub dataset: String,
    pub episodes: usize,
    pub steps: usize,
    /// Episode count per task.
    pub per_task: BTreeMap<String, usize>,
    /// Position residual (m) over all steps and both wrists.
    pub residual_pos: ResidualStats,
    /// Rotation residual (rad) over all steps and both wrists.
    pub residual_rot: ResidualStats,
    pub tracking: TrackingMetrics,
}

impl TripletManifest {
    /// Summarises records in the order given.
    pub fn from_episodes(dataset: &str, reps: &[RetargetedEpisode]) -> Result<Self> {
        if reps.is_empty() {
            return Err(Error::EmptyInput("no retargeted episodes"));
        }
        let mut per_task = BTreeMap::new();
        let mut acc = MaeAccumulator::default();
        let (mut pos, mut rot) = (ResidualStats::default(), ResidualStats::default());
        let mut n = 0usize;
        for ep in reps {
            *per_task.entry(ep.task.clone()).or_insert(0) += 1;
            for s in &ep.steps {
                acc.push(s.residual[0], s.residual[1]);
                for r in &s.residual {
                    pos.mean += r.pos;
                    rot.mean += r.rot;
                    pos.max = pos.max.max(r.pos);
                    rot.max = rot.max.max(r.rot);
                    n += 1;
                }
            }
        }
        pos.mean /= n as f64;
        rot.mean /= n as f64;
        Ok(Self {
            schema_version: MANIFEST_SCHEMA_VERSION,
            triplet_schema_version: TRIPLET_SCHEMA_VERSION,
            dataset: dataset.to_string(),
            episodes: reps.len(),
            steps: n / 2,
            per_task,
            residual_pos: pos,
            residual_rot: rot,
            tracking: acc.finish()?,
        })
    }
}

/// `dir/name.jsonl[.gz]` → `dir/name.manifest.json`.
pub fn manifest_path(dataset: &Path) -> PathBuf {
    let name = dataset.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let stem = name.trim_end_matches(".gz").trim_end_matches(".jsonl").trim_end_matches(".json");
    dataset.with_file_name(format!("{stem}.manifest.json"))
}

/// Writes one JSON line per episode plus a manifest beside it.
pub fn export_triplets(reps: &[RetargetedEpisode], path: &Path) -> Result<TripletManifest> {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let manifest = TripletManifest::from_episodes(&name, reps)?;
    write_jsonl(path, reps)?;
    let mpath = manifest_path(path);
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&mpath, text + "\n").map_err(|e| Error::file(&mpath, e))?;
    Ok(manifest)
}

pub fn read_triplets(path: &Path) -> Result<Vec<RetargetedEpisode>> {
    let (reps, _) = read_jsonl(
        path,
        false,
        |r: &RetargetedEpisode| r.episode_id.clone(),
        RetargetedEpisode::validate,
    )?;
    if reps.is_empty() {
        return Err(Error::EmptyInput("triplet file has no records"));
    }
    Ok(reps)
}

pub fn read_manifest(path: &Path) -> Result<TripletManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    let m: TripletManifest = serde_json::from_str(&text)?;
    if m.schema_version != MANIFEST_SCHEMA_VERSION {
        return Err(Error::Validation(format!(
            "unsupported manifest schema_version {}",
            m.schema_version
        )));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Pose, PoseError};
    use crate::pipeline::{RetargetedStep, WholeBodyAction};
    use crate::sim::{BaseState, LowerBodyCommand};

    fn rep(id: &str, task: &str, n: usize) -> RetargetedEpisode {
        let steps = (0..n)
            .map(|k| RetargetedStep {
                t: k as f64 * 0.05,
                action: WholeBodyAction {
                    left_arm: vec![0.1; 7],
                    right_arm: vec![-0.1; 7],
                    left_hand: vec![0.0; 7],
                    right_hand: vec![0.2; 7],
                    command: LowerBodyCommand::new(0.0, 0.0, 0.0, 0.75),
                },
                base: BaseState::at_rest(0.75),
                goal: [Pose::identity(); 2],
                realized: [Pose::from_translation(0.0, 0.01 * k as f64, 0.0), Pose::identity()],
                residual: [
                    PoseError {
                        pos: 0.01 * k as f64,
                        rot: 0.001 * (k % 3) as f64,
                    },
                    PoseError { pos: 0.003, rot: 0.0 },
                ],
            })
            .collect();
        RetargetedEpisode {
            schema_version: TRIPLET_SCHEMA_VERSION,
            episode_id: id.into(),
            task: task.into(),
            instruction: "pick up the cup".into(),
            vision_refs: vec![format!("{id}/cam0")],
            source_embodiment: "dual-arm".into(),
            target_embodiment: "humanoid".into(),
            frequency: 20.0,
            steps,
            summary: TrackingMetrics::default(),
        }
    }

    #[test]
    fn single_episode_bookkeeping() {
        let dir = tempfile::tempdir().unwrap();
        let m = export_triplets(&[rep("a", "pick", 4)], &dir.path().join("t.jsonl")).unwrap();
        assert_eq!((m.episodes, m.steps), (1, 4));
        assert_eq!(m.per_task.get("pick"), Some(&1));
        assert_eq!(read_manifest(&dir.path().join("t.manifest.json")).unwrap(), m);
    }

    #[test]
    fn round_trip_plain_and_gz() {
        let dir = tempfile::tempdir().unwrap();
        let reps = vec![rep("a", "pick", 5), rep("b", "place", 3), rep("c", "pick", 1)];
        for name in ["t.jsonl", "t.jsonl.gz"] {
            let p = dir.path().join(name);
            export_triplets(&reps, &p).unwrap();
            assert_eq!(read_triplets(&p).unwrap(), reps);
        }
    }

    #[test]
    fn manifest_matches_recomputation() {
        let reps = vec![rep("a", "pick", 7), rep("b", "place", 2)];
        let m = TripletManifest::from_episodes("x", &reps).unwrap();
        let all: Vec<PoseError> = reps.iter().flat_map(|e| e.steps.iter().flat_map(|s| s.residual)).collect();
        let mean = all.iter().map(|r| r.pos).sum::<f64>() / all.len() as f64;
        let max = all.iter().map(|r| r.rot).fold(0.0, f64::max);
        assert_eq!(m.residual_pos.mean, mean);
        assert_eq!(m.residual_rot.max, max);
        assert_eq!(m.per_task.values().sum::<usize>(), 2);
        assert_eq!(m.steps, 9);
    }

    #[test]
    fn empty_is_rejected() {
        assert!(TripletManifest::from_episodes("x", &[]).is_err());
    }
}
