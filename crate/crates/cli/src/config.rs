//! Run configuration: one TOML file with a section per stage.
//!
//! The global `seed` replaces the per-section `seed` keys. Unknown keys are
//! rejected everywhere. `RETARGET_SEED` and `RETARGET_OUT` override `seed` and
//! `out`; command-line flags override both.

use std::path::{Path, PathBuf};

use retarget_core::dagger::TrainerConfig;
use retarget_core::data::{Plane, PreprocessConfig, SeedSpec};
use retarget_core::eval::EvalConfig;
use retarget_core::flow::FlowConfig;
use retarget_core::interp::HeightAugmentSpec;
use retarget_core::pipeline::RetargetConfig;
use retarget_core::sim::SimConfig;
use retarget_core::{Error, Result};
use serde::{Deserialize, Serialize};

pub const SEED_ENV: &str = "RETARGET_SEED";
pub const OUT_ENV: &str = "RETARGET_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeatmapConfig {
    pub plane: Plane,
    pub grid: [usize; 2],
    pub bandwidth: f64,
}

impl Default for HeatmapConfig {
    fn default() -> Self {
        Self {
            plane: Plane::Xz,
            grid: [48, 48],
            bandwidth: 0.03,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainManagerConfig {
    /// One training run per mode, each in its own directory.
    pub modes: Vec<String>,
}

impl Default for TrainManagerConfig {
    fn default() -> Self {
        Self {
            modes: vec!["harmonized".into(), "online".into(), "standard-dagger".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetargetStageConfig {
    /// Which trained manager drives the retargeting.
    pub manager_mode: String,
    pub control_rate: f64,
    pub warm_start: bool,
    pub target_embodiment: String,
}

impl Default for RetargetStageConfig {
    fn default() -> Self {
        let d = RetargetConfig::default();
        Self {
            manager_mode: "harmonized".into(),
            control_rate: d.control_rate,
            warm_start: d.warm_start,
            target_embodiment: d.target_embodiment,
        }
    }
}

/// Input overrides; by default each stage reads its upstream stage's output.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub seeds: Option<PathBuf>,
    pub preprocessed: Option<PathBuf>,
    pub augmented: Option<PathBuf>,
    pub manager: Option<PathBuf>,
    pub triplets: Option<PathBuf>,
    pub flow_model: Option<PathBuf>,
    /// Robot description; the built-in humanoid when absent.
    pub robot: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub paths: PathsConfig,
    pub seeds: SeedSpec,
    pub preprocess: PreprocessConfig,
    pub heatmap: HeatmapConfig,
    pub augment: HeightAugmentSpec,
    pub sim: SimConfig,
    pub trainer: TrainerConfig,
    pub train_manager: TrainManagerConfig,
    pub retarget: RetargetStageConfig,
    pub flow: FlowConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("runs"),
            paths: PathsConfig::default(),
            seeds: SeedSpec::default(),
            preprocess: PreprocessConfig::default(),
            heatmap: HeatmapConfig::default(),
            augment: HeightAugmentSpec::default(),
            sim: SimConfig::default(),
            trainer: TrainerConfig::default(),
            train_manager: TrainManagerConfig::default(),
            retarget: RetargetStageConfig::default(),
            flow: FlowConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::File {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml_str(&text)
    }

    /// Applies environment then flag overrides and propagates the seed.
    pub fn resolve(mut self, seed: Option<u64>, out: Option<PathBuf>, env: impl Fn(&str) -> Option<String>) -> Result<Self> {
        if let Some(s) = env(SEED_ENV) {
            self.seed = s
                .trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("{SEED_ENV}=`{s}` is not an unsigned integer")))?;
        }
        if let Some(o) = env(OUT_ENV) {
            self.out = PathBuf::from(o);
        }
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(o) = out {
            self.out = o;
        }
        self.augment.seed = self.seed;
        self.trainer.seed = self.seed;
        self.flow.seed = self.seed;
        self.eval.seed = self.seed;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.seeds.validate()?;
        self.preprocess.validate()?;
        self.augment.validate()?;
        self.sim.validate()?;
        self.trainer.validate()?;
        self.flow.validate()?;
        if self.train_manager.modes.is_empty() {
            return Err(Error::InvalidConfig("train_manager.modes is empty".into()));
        }
        for mode in &self.train_manager.modes {
            TrainerConfig {
                mode: mode.clone(),
                ..self.trainer.clone()
            }
            .validate()?;
        }
        if !(self.retarget.control_rate > 0.0) {
            return Err(Error::InvalidConfig("retarget.control_rate must be positive".into()));
        }
        if !(self.heatmap.bandwidth > 0.0) || self.heatmap.grid.iter().any(|g| *g < 2) {
            return Err(Error::InvalidConfig(
                "heatmap needs a positive bandwidth and a grid of at least 2x2".into(),
            ));
        }
        Ok(())
    }

    pub fn retarget_config(&self) -> RetargetConfig {
        RetargetConfig {
            sim: self.sim,
            control_rate: self.retarget.control_rate,
            warm_start: self.retarget.warm_start,
            target_embodiment: self.retarget.target_embodiment.clone(),
            seed: self.seed,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(format!("cannot serialise config: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_env(_: &str) -> Option<String> {
        None
    }

    #[test]
    fn empty_file_is_the_default() {
        let cfg = RunConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        cfg.resolve(None, None, no_env).unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml_str("sed = 3").is_err());
        assert!(RunConfig::from_toml_str("[trainer]\nperiods = 3").is_err());
    }

    #[test]
    fn overrides_apply_in_order() {
        let cfg = RunConfig::from_toml_str("seed = 1\nout = \"a\"").unwrap();
        let env = |k: &str| match k {
            SEED_ENV => Some("2".to_string()),
            OUT_ENV => Some("b".to_string()),
            _ => None,
        };
        let r = cfg.clone().resolve(None, None, env).unwrap();
        assert_eq!((r.seed, r.out.clone(), r.trainer.seed, r.flow.seed), (2, PathBuf::from("b"), 2, 2));
        let r = cfg.clone().resolve(Some(3), Some("c".into()), env).unwrap();
        assert_eq!((r.seed, r.out), (3, PathBuf::from("c")));
        assert!(cfg.resolve(None, None, |_| Some("x".into())).is_err());
    }

    #[test]
    fn snapshot_round_trips() {
        let cfg = RunConfig::from_toml_str("seed = 9\n[trainer]\nn_envs = 16\nda_max_minibatches = 2").unwrap();
        let cfg = cfg.resolve(None, None, no_env).unwrap();
        assert_eq!(RunConfig::from_toml_str(&cfg.to_toml().unwrap()).unwrap(), cfg);
    }

    #[test]
    fn invalid_workspace_is_a_validation_error() {
        let cfg = RunConfig::from_toml_str("[seeds.workspace]\nx = [0.8, 0.2]\ny = [0.0, 0.1]\nz = [0.5, 1.0]").unwrap();
        let err = cfg.resolve(None, None, no_env).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)), "{err}");
    }
}
