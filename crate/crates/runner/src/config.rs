//! Experiment configuration: a single TOML document with nested tables.
//! Defaults match the tuned training parameters; conditions and schedules
//! describe the surrogate environment.

use std::path::Path;

use serde::{Deserialize, Serialize};

use ringlearn_core::boundary::BoundaryParams;
use ringlearn_core::envsim::{Condition, Schedule};
use ringlearn_core::learning::{LearnConfig, RewardMode};

use crate::{Result, RunnerError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    /// Transition speed applied uniformly.
    pub tau: f64,
    /// Feedback channel count (pitch, motor-state flags, color features).
    pub n_fb: usize,
    /// Motor output count.
    pub n_actions: usize,
    /// Rings at startup; more than one starts them disconnected.
    pub initial_subnetworks: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            tau: 0.08,
            n_fb: 21,
            n_actions: 18,
            initial_subnetworks: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationConfig {
    /// Never grow subnetworks.
    pub disable_neurogenesis: bool,
    /// Keep premotor cross weights at zero for the whole run.
    pub disable_supplementary: bool,
    /// New subnetworks copy subnetwork 0 instead of the active one.
    pub naive_transfer: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    /// Half-open episode range.
    pub episodes: [usize; 2],
    pub condition: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub episodes: usize,
    pub timesteps_per_episode: usize,
    pub reward_mode: RewardMode,
    /// Episodes after a growth or an active-subnetwork switch during which
    /// novelty is not evaluated, letting recall settle.
    pub grace_episodes: usize,
    /// Maximum number of subnetworks; absent means unlimited.
    pub growth_cap: Option<usize>,
    /// Snapshot cadence in episodes; 0 writes only the final snapshot.
    pub snapshot_every: usize,
    /// Fixed number of per-subnetwork contribution columns in metrics.csv.
    pub contrib_slots: usize,
    /// Per-motor torque gain for the energy reward; defaults to ones.
    pub torque_gains: Option<Vec<f64>>,
    pub learn: LearnConfig,
    pub boundary: BoundaryParams,
    pub network: NetworkConfig,
    pub ablation: AblationConfig,
    pub conditions: Vec<Condition>,
    pub schedule: Vec<ScheduleEntry>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            episodes: 200,
            timesteps_per_episode: 30,
            reward_mode: RewardMode::Speed,
            grace_episodes: 3,
            growth_cap: None,
            snapshot_every: 0,
            contrib_slots: 8,
            torque_gains: None,
            learn: LearnConfig::default(),
            boundary: BoundaryParams::default(),
            network: NetworkConfig::default(),
            ablation: AblationConfig::default(),
            conditions: Vec::new(),
            schedule: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| RunnerError::io(path, e))?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| RunnerError::Config(format!("{path:?}: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(RunnerError::Config("episodes must be at least 1".into()));
        }
        if self.timesteps_per_episode == 0 {
            return Err(RunnerError::Config("episodes need timesteps".into()));
        }
        if self.network.initial_subnetworks == 0 {
            return Err(RunnerError::Config(
                "need at least one initial subnetwork".into(),
            ));
        }
        if self.contrib_slots < self.network.initial_subnetworks {
            return Err(RunnerError::Config(
                "contrib_slots smaller than the initial subnetwork count".into(),
            ));
        }
        if self.conditions.is_empty() || self.schedule.is_empty() {
            return Err(RunnerError::Config(
                "at least one condition and one schedule entry required".into(),
            ));
        }
        if let Some(g) = &self.torque_gains {
            if g.len() != self.network.n_actions {
                return Err(RunnerError::Config(
                    "torque_gains length must match n_actions".into(),
                ));
            }
        }
        for cond in &self.conditions {
            cond.validate(self.network.n_fb, self.network.n_actions)?;
        }
        let sched = self.schedule_table();
        sched.validate(self.episodes)?;
        for (_, _, id) in &sched.entries {
            if !self.conditions.iter().any(|c| &c.id == id) {
                return Err(RunnerError::Config(format!("unknown condition '{id}'")));
            }
        }
        Ok(())
    }

    pub fn schedule_table(&self) -> Schedule {
        Schedule {
            entries: self
                .schedule
                .iter()
                .map(|e| (e.episodes[0], e.episodes[1], e.condition.clone()))
                .collect(),
        }
    }

    pub fn condition(&self, id: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.id == id)
    }

    pub fn torque_gain_vec(&self) -> Vec<f64> {
        self.torque_gains
            .clone()
            .unwrap_or_else(|| vec![1.0; self.network.n_actions])
    }
}
