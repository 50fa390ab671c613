use super::trainer::TrainerConfig;
use crate::error::{Error, Result};
use crate::registry::Registry;

/// Decides, per iteration, whether to take the rollout-loss step and
/// whether to aggregate the rollout into the dataset (followed by a
/// dataset-loss step).
pub trait TrainingSchedule: Send + Sync {
    fn name(&self) -> &str;
    fn rollout_step(&self) -> bool;
    /// Iterations are 0-indexed.
    fn aggregate_at(&self, iteration: usize) -> bool;
}

/// Rollout step every iteration, aggregation every `period` iterations
/// (at `0, period, 2 * period, ...`).
#[derive(Debug, Clone)]
pub struct Harmonized {
    name: &'static str,
    period: usize,
}

impl TrainingSchedule for Harmonized {
    fn name(&self) -> &str {
        self.name
    }

    fn rollout_step(&self) -> bool {
        true
    }

    fn aggregate_at(&self, iteration: usize) -> bool {
        iteration.is_multiple_of(self.period)
    }
}

/// Rollout-loss steps only; nothing is stored.
#[derive(Debug, Clone)]
pub struct Online;

impl TrainingSchedule for Online {
    fn name(&self) -> &str {
        "online"
    }

    fn rollout_step(&self) -> bool {
        true
    }

    fn aggregate_at(&self, _: usize) -> bool {
        false
    }
}

/// Classic DAgger: aggregate every iteration, train on the dataset only.
#[derive(Debug, Clone)]
pub struct StandardDagger;

impl TrainingSchedule for StandardDagger {
    fn name(&self) -> &str {
        "standard-dagger"
    }

    fn rollout_step(&self) -> bool {
        false
    }

    fn aggregate_at(&self, _: usize) -> bool {
        true
    }
}

/// Registry of `harmonized`, `online`, `online-dagger` and `standard-dagger`.
pub fn schedule_registry() -> Registry<dyn TrainingSchedule, TrainerConfig> {
    let mut reg: Registry<dyn TrainingSchedule, TrainerConfig> = Registry::new("training mode");
    reg.register("harmonized", |c: &TrainerConfig| {
        if c.period == 0 {
            return Err(Error::InvalidConfig("aggregation period must be >= 1".into()));
        }
        Ok(Box::new(Harmonized {
            name: "harmonized",
            period: c.period,
        }))
    });
    reg.register("online-dagger", |_: &TrainerConfig| {
        Ok(Box::new(Harmonized {
            name: "online-dagger",
            period: 1,
        }))
    });
    reg.register("online", |_: &TrainerConfig| Ok(Box::new(Online)));
    reg.register("standard-dagger", |_: &TrainerConfig| Ok(Box::new(StandardDagger)));
    reg
}

pub fn build_schedule(cfg: &TrainerConfig) -> Result<Box<dyn TrainingSchedule>> {
    schedule_registry().build(&cfg.mode, cfg)
}
