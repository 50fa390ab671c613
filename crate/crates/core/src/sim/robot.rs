use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ChainConfig, KinematicChain};
use crate::pipeline::HandKeyframes;

pub const ROBOT_SCHEMA_VERSION: u32 = 1;

/// Bundled description of the target humanoid's arms and hands.
pub const DEFAULT_ROBOT_TOML: &str = include_str!("../../assets/humanoid.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotConfig {
    pub schema_version: u32,
    pub left_arm: ChainConfig,
    pub right_arm: ChainConfig,
    pub left_hand: HandKeyframes,
    pub right_hand: HandKeyframes,
}

/// Upper body of the target humanoid: two arm chains expressed in the
/// floating base frame plus hand keyframes.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    pub left_arm: KinematicChain,
    pub right_arm: KinematicChain,
    pub left_hand: HandKeyframes,
    pub right_hand: HandKeyframes,
}

impl RobotModel {
    pub fn from_config(cfg: &RobotConfig) -> Result<Self> {
        if cfg.schema_version != ROBOT_SCHEMA_VERSION {
            return Err(Error::InvalidConfig(format!(
                "robot schema_version {} unsupported (expected {ROBOT_SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        cfg.left_hand.validate()?;
        cfg.right_hand.validate()?;
        Ok(Self {
            left_arm: KinematicChain::from_config(&cfg.left_arm)?,
            right_arm: KinematicChain::from_config(&cfg.right_arm)?,
            left_hand: cfg.left_hand.clone(),
            right_hand: cfg.right_hand.clone(),
        })
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RobotConfig = toml::from_str(s)?;
        Self::from_config(&cfg)
    }

    pub fn arms(&self) -> [&KinematicChain; 2] {
        [&self.left_arm, &self.right_arm]
    }
}

impl Default for RobotModel {
    fn default() -> Self {
        Self::from_toml_str(DEFAULT_ROBOT_TOML).expect("bundled robot description is valid")
    }
}
