//! Deterministic surrogate locomotion environment.
//!
//! Reward is the closeness of the motor command to a per-phase target
//! configuration, with the phase taken from the controller's own dominant
//! basis. That couples reward to the learned per-phase weights and admits a
//! closed-form oracle. Feedback is a per-condition base vector plus Gaussian
//! noise; torque/voltage telemetry is synthetic plumbing for the energy
//! reward.

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::learning::{assemble_returns, EpisodeTrace, Perturbation, RewardMode};
use crate::linalg;
use crate::mat::Mat;
use crate::network::{argmax, network_forward, NetworkState};
use crate::params::LearnableParams;
use crate::topology::{Topology, SUBNET_SIZE};
use crate::weights::FixedWeights;

/// Number of key poses a condition defines, matching the ring size.
pub const N_PHASES: usize = SUBNET_SIZE;

/// One environment condition: optimal joint configurations per phase and the
/// observation statistics that identify it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub id: String,
    /// N_PHASES rows of n_actions target joint positions.
    pub targets: Vec<Vec<f64>>,
    /// Feedback offsets characterizing the condition.
    pub obs_base: Vec<f64>,
    /// Gaussian noise std on every feedback channel.
    pub obs_noise_std: f64,
    /// Peak reward.
    pub v_max: f64,
}

impl Condition {
    pub fn validate(&self, n_fb: usize, n_actions: usize) -> Result<()> {
        if self.targets.len() != N_PHASES
            || self.targets.iter().any(|t| t.len() != n_actions)
        {
            return Err(CoreError::DimensionMismatch(format!(
                "condition {}: targets must be {N_PHASES} x {n_actions}",
                self.id
            )));
        }
        if self.obs_base.len() != n_fb {
            return Err(CoreError::DimensionMismatch(format!(
                "condition {}: obs_base must have {n_fb} channels",
                self.id
            )));
        }
        if self.obs_noise_std < 0.0
            || self
                .targets
                .iter()
                .flatten()
                .chain(self.obs_base.iter())
                .any(|v| !v.is_finite())
        {
            return Err(CoreError::DimensionMismatch(format!(
                "condition {}: non-finite entries",
                self.id
            )));
        }
        Ok(())
    }
}

/// Ordered (half-open episode range, condition id) assignments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub entries: Vec<(usize, usize, String)>,
}

impl Schedule {
    pub fn validate(&self, episodes: usize) -> Result<()> {
        let mut cursor = 0;
        for (a, b, id) in &self.entries {
            if *a != cursor || b <= a {
                return Err(CoreError::InvalidTopology(format!(
                    "schedule entry {id}: ranges must be contiguous half-open"
                )));
            }
            cursor = *b;
        }
        if cursor < episodes {
            return Err(CoreError::UncoveredEpisode(cursor));
        }
        Ok(())
    }
}

/// Condition id covering `episode`.
pub fn schedule_condition(episode: usize, sched: &Schedule) -> Result<&str> {
    sched
        .entries
        .iter()
        .find(|(a, b, _)| episode >= *a && episode < *b)
        .map(|(_, _, id)| id.as_str())
        .ok_or(CoreError::UncoveredEpisode(episode))
}

/// One step of environment telemetry.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub fb: Vec<f64>,
    pub speed: f64,
    pub torques: Vec<f64>,
    pub voltages: Vec<f64>,
}

/// Surrogate environment instance; one per rollout. Remembers the previous
/// action for the synthetic torque model.
#[derive(Debug, Clone)]
pub struct SurrogateEnv {
    cond: Condition,
    prev_action: Vec<f64>,
}

impl SurrogateEnv {
    pub fn new(cond: Condition, n_actions: usize) -> Self {
        SurrogateEnv {
            cond,
            prev_action: vec![0.0; n_actions],
        }
    }

    /// Advance one step. `phase_hint` is the controller's dominant basis
    /// index; reward measures the action against that phase's target.
    pub fn step<R: Rng>(&mut self, action: &[f64], phase_hint: usize, rng: &mut R) -> EnvStep {
        let target = &self.cond.targets[phase_hint % N_PHASES];
        let n = action.len() as f64;
        let err: f64 = action
            .iter()
            .zip(target)
            .map(|(a, t)| (a - t) * (a - t))
            .sum();
        let speed = self.cond.v_max * (1.0 - err / n).max(0.0);

        let fb: Vec<f64> = self
            .cond
            .obs_base
            .iter()
            .map(|base| {
                let z: f64 = rng.sample(StandardNormal);
                base + z * self.cond.obs_noise_std
            })
            .collect();

        let torques: Vec<f64> = action
            .iter()
            .zip(&self.prev_action)
            .map(|(a, p)| 0.1 * (a - p).abs() + 0.02)
            .collect();
        let voltages = vec![12.0; action.len()];
        self.prev_action = action.to_vec();
        EnvStep {
            fb,
            speed,
            torques,
            voltages,
        }
    }
}

/// Least-squares motor weights for one condition: roll the bare ring, record
/// basis traces paired with the phase targets they should produce, and solve
/// per action dimension. Returns the weights and the mean per-episode return
/// the oracle achieves, measured by direct rollout.
pub fn oracle_weights(
    cond: &Condition,
    topo: &Topology,
    fixed: &FixedWeights,
    params: &LearnableParams,
    horizon: usize,
    episode_len: usize,
) -> Result<(Mat, f64)> {
    let n_c = topo.n_c();
    let n_actions = topo.n_actions;
    cond.validate(topo.n_fb, n_actions)?;

    // Collect basis rows over a few ring cycles, after a warmup transient.
    let neutral = LearnableParams::new(topo, 0.0);
    let mut state = NetworkState::initial(topo, &neutral);
    let fb0 = cond.obs_base.clone();
    let warmup = 600;
    let samples = 1200;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(samples);
    let mut phases: Vec<usize> = Vec::with_capacity(samples);
    for i in 0..(warmup + samples) {
        state = network_forward(&state, &fb0, topo, fixed, &neutral)?;
        if i >= warmup {
            rows.push(state.b.clone());
            phases.push(argmax(&state.b));
        }
    }

    let mut flat = Vec::with_capacity(samples * n_c);
    for r in &rows {
        flat.extend_from_slice(r);
    }
    let mut w = Mat::zeros(n_actions, n_c);
    for j in 0..n_actions {
        let y: Vec<f64> = phases
            .iter()
            .map(|&p| cond.targets[p % N_PHASES][j])
            .collect();
        let sol = linalg::lstsq(&flat, &y, samples, n_c)?;
        for k in 0..n_c {
            w.set(j, k, sol[k]);
        }
    }

    // Evaluate by rollout with the solved weights and no exploration.
    let mut eval = params.clone();
    eval.w_mot = w.clone();
    let mut env = SurrogateEnv::new(
        Condition {
            obs_noise_std: 0.0,
            ..cond.clone()
        },
        n_actions,
    );
    let mut state = NetworkState::initial(topo, &eval);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    for _ in 0..warmup {
        state = network_forward(&state, &fb0, topo, fixed, &eval)?;
    }
    let mut rewards = Vec::with_capacity(episode_len);
    for _ in 0..episode_len {
        let step = env.step(&state.m, argmax(&state.b), &mut rng);
        rewards.push(step.speed);
        state = network_forward(&state, &step.fb, topo, fixed, &eval)?;
    }
    let returns = assemble_returns(&rewards, horizon, RewardMode::Speed)?;
    let mean_return = returns.iter().sum::<f64>() / returns.len() as f64;
    Ok((w, mean_return))
}

/// Roll one full episode under fixed (already perturbed) parameters. Shared
/// by the runner and the tests. Consumes `rng` draws in a fixed order: the
/// feedback noise of each step.
#[allow(clippy::too_many_arguments)]
pub fn rollout_episode<R: Rng>(
    state: &mut NetworkState,
    env: &mut SurrogateEnv,
    topo: &Topology,
    fixed: &FixedWeights,
    explored: &LearnableParams,
    perturbation: Perturbation,
    reward_mode: RewardMode,
    horizon: usize,
    episode_len: usize,
    torque_gains: &[f64],
    condition_id: &str,
    rng: &mut R,
) -> Result<EpisodeTrace> {
    let mut states = Vec::with_capacity(episode_len);
    let mut rewards = Vec::with_capacity(episode_len);
    for _ in 0..episode_len {
        let step = env.step(&state.m, argmax(&state.b), rng);
        let reward = match reward_mode {
            RewardMode::Speed => step.speed,
            RewardMode::Cot => crate::learning::cot_reward(
                step.speed,
                &step.torques,
                &step.voltages,
                torque_gains,
                4.7,
                9.81,
            )?,
        };
        states.push(state.clone());
        rewards.push(reward);
        *state = network_forward(state, &step.fb, topo, fixed, explored)?;
    }
    let returns = assemble_returns(&rewards, horizon, reward_mode)?;
    Ok(EpisodeTrace {
        states,
        rewards,
        returns,
        perturbation,
        condition_id: condition_id.to_string(),
    })
}
