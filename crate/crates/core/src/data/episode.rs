use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pose;

/// One control tick of a dual-arm episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    /// Seconds from episode start.
    pub t: f64,
    pub left_wrist: Pose,
    pub right_wrist: Pose,
    /// Open fraction in `[0, 1]` (1 = fully open).
    pub left_grip: f64,
    pub right_grip: f64,
    /// Goal torso height `h*(t)` attached by height augmentation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_height: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentationInfo {
    pub source_episode: String,
    pub variant: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    /// Set once the source-to-target normalisation has been applied.
    #[serde(default)]
    pub preprocessed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augmentation: Option<AugmentationInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Episode {
    pub id: String,
    pub task: String,
    pub instruction: String,
    /// Sampling rate in Hz.
    pub frequency: f64,
    /// Source robot / end-effector tag, e.g. `wheeled-dual-arm/gripper`.
    pub embodiment: String,
    /// Opaque references to camera frames of the source dataset.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vision_refs: Vec<String>,
    #[serde(default)]
    pub provenance: Provenance,
    pub steps: Vec<Step>,
}

impl Episode {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Validation(format!("episode `{}`: {msg}", self.id)));
        if self.steps.len() < 2 {
            return fail(format!("needs at least 2 steps, has {}", self.steps.len()));
        }
        if !(self.frequency > 0.0 && self.frequency.is_finite()) {
            return fail(format!("frequency must be positive, got {}", self.frequency));
        }
        for (i, s) in self.steps.iter().enumerate() {
            if !s.t.is_finite() || !s.left_wrist.is_finite() || !s.right_wrist.is_finite() {
                return fail(format!("step {i} has non-finite values"));
            }
            for (name, g) in [("left_grip", s.left_grip), ("right_grip", s.right_grip)] {
                if !(0.0..=1.0).contains(&g) {
                    return fail(format!("step {i}: {name} = {g} outside [0, 1]"));
                }
            }
            if let Some(h) = s.goal_height {
                if !h.is_finite() {
                    return fail(format!("step {i}: non-finite goal_height"));
                }
            }
            if i > 0 && !(s.t > self.steps[i - 1].t) {
                return fail(format!("timestamps not strictly increasing at step {i}"));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn duration(&self) -> f64 {
        match (self.steps.first(), self.steps.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn sample_episode(id: &str, n: usize) -> Episode {
        let steps = (0..n)
            .map(|i| {
                let f = i as f64;
                Step {
                    t: f * 0.05,
                    left_wrist: Pose::from_translation(0.3 + 0.01 * f, 0.2, 0.8),
                    right_wrist: Pose::from_translation(0.3, -0.2 - 0.005 * f, 0.8 + 0.01 * f),
                    left_grip: 1.0,
                    right_grip: 0.25,
                    goal_height: None,
                }
            })
            .collect();
        Episode {
            id: id.to_string(),
            task: "reach".into(),
            instruction: "reach for the cup".into(),
            frequency: 20.0,
            embodiment: "wheeled-dual-arm/gripper".into(),
            vision_refs: vec![format!("{id}/head/0")],
            provenance: Provenance::default(),
            steps,
        }
    }

    #[test]
    fn validation() {
        let ep = sample_episode("a", 4);
        ep.validate().unwrap();
        let mut bad = ep.clone();
        bad.steps[1].left_grip = 1.3;
        assert!(bad.validate().unwrap_err().to_string().contains("left_grip"));
        let mut bad = ep.clone();
        bad.steps[2].t = bad.steps[1].t;
        assert!(bad.validate().is_err());
        let mut bad = ep.clone();
        bad.steps.truncate(1);
        assert!(bad.validate().is_err());
    }
}
