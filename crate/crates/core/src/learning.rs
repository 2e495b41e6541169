//! Replay management, parameter-based exploration, the dual-layer update
//! rule, supervised predictor fits, and skill-contribution reporting.
//!
//! The weight update moves each parameter toward the replayed perturbations
//! that earned above-average advantage, weighted by the magnitude of the
//! backpropagated action gradient so inactive bases contribute nothing. The
//! raw rule is self-normalized per parameter (numerator and denominator carry
//! the same gradient weights), which bounds every step by the learning rate
//! times the perturbation scale regardless of buffer size.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::mat::Mat;
use crate::network::NetworkState;
use crate::params::LearnableParams;
use crate::topology::Topology;

/// Training parameters. Defaults are the tuned values used throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnConfig {
    pub eta: f64,
    pub eta_sigma: f64,
    pub eta_v: f64,
    pub eta_o: f64,
    pub eta_dev_scale: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub horizon: usize,
    pub basis_active_eps: f64,
    pub standardize_guard: f64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            eta: 0.5,
            eta_sigma: 0.05,
            eta_v: 0.2,
            eta_o: 0.5,
            eta_dev_scale: 0.1,
            sigma_min: 0.01,
            sigma_max: 0.05,
            horizon: 14,
            basis_active_eps: 1e-2,
            standardize_guard: 1e-8,
        }
    }
}

/// Reward flavor selecting how returns are assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardMode {
    Speed,
    Cot,
}

/// Episodes kept for replay.
pub const REPLAY_CAPACITY: usize = 8;
/// Timesteps per episode.
pub const EPISODE_LEN: usize = 30;

/// The sampled parameter offsets held fixed for one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub d_mot: Mat,
    pub d_sup: Mat,
}

impl Perturbation {
    pub fn zeros(topo: &Topology) -> Self {
        Perturbation {
            d_mot: Mat::zeros(topo.n_actions, topo.n_c()),
            d_sup: Mat::zeros(topo.n_c(), topo.n_c()),
        }
    }
}

/// One episode of experience: the visited states, the reward stream, the
/// assembled returns, and the perturbation that produced the behavior.
/// `condition_id` is diagnostic only; the learner never reads it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub states: Vec<NetworkState>,
    pub rewards: Vec<f64>,
    pub returns: Vec<f64>,
    pub perturbation: Perturbation,
    pub condition_id: String,
}

impl EpisodeTrace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Value prediction summed over the same truncated window as the return
    /// at `t`, so the two live in the same units.
    pub fn predicted_return(&self, t: usize, horizon: usize) -> f64 {
        let end = (t + horizon).min(self.states.len() - 1);
        self.states[t..=end].iter().map(|s| s.v).sum()
    }

    /// Deviation band at `t`.
    pub fn value_band(&self, t: usize) -> f64 {
        self.states[t].vdev
    }

    /// Re-index a recorded trace for a grown topology: the appended neurons
    /// did not exist, so their activities are zero and their perturbation
    /// offsets are zero.
    pub fn extended(&self, topo: &Topology) -> EpisodeTrace {
        let n = topo.n_c();
        EpisodeTrace {
            states: self.states.iter().map(|s| s.extended(topo)).collect(),
            rewards: self.rewards.clone(),
            returns: self.returns.clone(),
            perturbation: Perturbation {
                d_mot: self.perturbation.d_mot.resized(topo.n_actions, n, 0.0),
                d_sup: self.perturbation.d_sup.resized(n, n, 0.0),
            },
            condition_id: self.condition_id.clone(),
        }
    }
}

/// Ring buffer of the most recent episodes, oldest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    traces: VecDeque<EpisodeTrace>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            capacity,
            traces: VecDeque::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, trace: EpisodeTrace) {
        if self.traces.len() == self.capacity {
            self.traces.pop_front();
        }
        self.traces.push_back(trace);
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &EpisodeTrace> {
        self.traces.iter()
    }

    pub fn latest(&self) -> Option<&EpisodeTrace> {
        self.traces.back()
    }

    /// Re-index every stored trace for a grown topology.
    pub fn extend_for(&mut self, topo: &Topology) {
        for tr in &mut self.traces {
            *tr = tr.extended(topo);
        }
    }
}

/// Horizon-summed returns. `speed` sums the reward over the (truncated)
/// window; `cot` adds the window minimum to emphasize worst-case performance.
pub fn assemble_returns(rewards: &[f64], horizon: usize, mode: RewardMode) -> Result<Vec<f64>> {
    if rewards.is_empty() {
        return Err(CoreError::EmptyTrace);
    }
    let t_max = rewards.len() - 1;
    Ok((0..rewards.len())
        .map(|t| {
            let end = (t + horizon).min(t_max);
            let window = &rewards[t..=end];
            let sum: f64 = window.iter().sum();
            match mode {
                RewardMode::Speed => sum,
                RewardMode::Cot => sum + window.iter().cloned().fold(f64::INFINITY, f64::min),
            }
        })
        .collect())
}

/// Inverse cost of transport from speed and per-motor power telemetry.
pub fn cot_reward(
    speed: f64,
    torques: &[f64],
    voltages: &[f64],
    gains: &[f64],
    mass: f64,
    gravity: f64,
) -> Result<f64> {
    let denom: f64 = gains
        .iter()
        .zip(torques)
        .zip(voltages)
        .map(|((k, t), v)| k * t * v)
        .sum();
    if denom <= 0.0 {
        return Err(CoreError::DegeneratePower(denom));
    }
    Ok(mass * gravity * speed / denom)
}

/// Draw one perturbation, apply it, and return both the perturbed parameters
/// and the stored offsets. Only the motor mapping and the learnable premotor
/// cross entries are explored. Draws are always consumed so parallel runs
/// with different ablations stay on the same random stream; `explore_sup`
/// merely zeroes the premotor offsets before application.
pub fn sample_parameters<R: Rng>(
    params: &LearnableParams,
    topo: &Topology,
    rng: &mut R,
    explore_sup: bool,
) -> (LearnableParams, Perturbation) {
    let mut d_mot = Mat::zeros(topo.n_actions, topo.n_c());
    for r in 0..topo.n_actions {
        for c in 0..topo.n_c() {
            let z: f64 = rng.sample(StandardNormal);
            d_mot.set(r, c, z * params.sigma_mot.get(r, c));
        }
    }
    let mut d_sup = Mat::zeros(topo.n_c(), topo.n_c());
    for (i, k) in LearnableParams::cross_entries(topo) {
        let z: f64 = rng.sample(StandardNormal);
        if explore_sup {
            d_sup.set(i, k, z * params.sigma_sup.get(i, k));
        }
    }

    let mut explored = params.clone();
    for r in 0..topo.n_actions {
        for c in 0..topo.n_c() {
            explored
                .w_mot
                .set(r, c, params.w_mot.get(r, c) + d_mot.get(r, c));
        }
    }
    for (i, k) in LearnableParams::cross_entries(topo) {
        explored
            .w_sup
            .set(i, k, params.w_sup.get(i, k) + d_sup.get(i, k));
    }
    (explored, Perturbation { d_mot, d_sup })
}

/// Standardized advantages, one value per (episode, timestep) of the buffer
/// in oldest-first order.
#[derive(Debug, Clone, PartialEq)]
pub struct Advantages {
    pub per_episode: Vec<Vec<f64>>,
}

/// Advantage = standardize(return - predicted return) over the whole buffer.
/// Adding a constant to every return leaves the output unchanged; if the
/// spread collapses below the guard the advantages are all zero.
pub fn compute_advantages(replay: &ReplayBuffer, cfg: &LearnConfig) -> Advantages {
    let mut raw: Vec<Vec<f64>> = Vec::with_capacity(replay.len());
    let mut flat = Vec::new();
    for tr in replay.iter() {
        let row: Vec<f64> = (0..tr.len())
            .map(|t| tr.returns[t] - tr.predicted_return(t, cfg.horizon))
            .collect();
        flat.extend_from_slice(&row);
        raw.push(row);
    }
    if flat.is_empty() {
        return Advantages { per_episode: raw };
    }
    let n = flat.len() as f64;
    let mean = flat.iter().sum::<f64>() / n;
    let var = flat.iter().map(|x| (x - mean, )).map(|(d,)| d * d).sum::<f64>() / n;
    let std = var.sqrt();
    if std < cfg.standardize_guard {
        for row in &mut raw {
            row.iter_mut().for_each(|x| *x = 0.0);
        }
    } else {
        for row in &mut raw {
            row.iter_mut()
                .for_each(|x| *x = (*x - mean) / (std + cfg.standardize_guard));
        }
    }
    Advantages { per_episode: raw }
}

/// Bases that crossed the activity threshold anywhere in the buffer. Columns
/// outside this set are skipped entirely by the primary update, which is what
/// keeps inactive skills bit-identical.
fn active_basis_mask(replay: &ReplayBuffer, cfg: &LearnConfig, n_c: usize) -> Vec<bool> {
    let mut mask = vec![false; n_c];
    for tr in replay.iter() {
        for s in &tr.states {
            for k in 0..n_c {
                if s.b[k] > cfg.basis_active_eps {
                    mask[k] = true;
                }
            }
        }
    }
    mask
}

/// Masked policy-gradient step on the motor mapping and its exploration
/// rates. The gradient weight of entry (j, k) at time t is |pm_k[t]| from the
/// perturbed rollout.
pub fn update_primary(
    params: &mut LearnableParams,
    replay: &ReplayBuffer,
    adv: &Advantages,
    cfg: &LearnConfig,
) {
    if replay.is_empty() {
        return;
    }
    let n_c = params.n_c();
    let n_a = params.w_mot.rows();
    let mask = active_basis_mask(replay, cfg, n_c);
    let guard = cfg.standardize_guard;

    // Per (episode, column): gradient-weighted advantage mass.
    let episodes: Vec<&EpisodeTrace> = replay.iter().collect();
    let mut s_ga = vec![vec![0.0; n_c]; episodes.len()];
    let mut s_gabs = vec![vec![0.0; n_c]; episodes.len()];
    for (e, tr) in episodes.iter().enumerate() {
        for (t, s) in tr.states.iter().enumerate() {
            let a = adv.per_episode[e][t];
            for k in 0..n_c {
                let g = s.pm[k].abs();
                s_ga[e][k] += g * a;
                s_gabs[e][k] += g * a.abs();
            }
        }
    }

    for k in 0..n_c {
        if !mask[k] {
            continue;
        }
        for j in 0..n_a {
            let sigma = params.sigma_mot.get(j, k);
            let s2 = sigma * sigma;
            let s3 = s2 * sigma;
            let mut num_w = 0.0;
            let mut den_w = 0.0;
            let mut num_s = 0.0;
            let mut den_s = 0.0;
            for (e, tr) in episodes.iter().enumerate() {
                let xi = tr.perturbation.d_mot.get(j, k);
                num_w += (xi / s2) * s_ga[e][k];
                den_w += s_gabs[e][k] / s2;
                num_s += ((xi * xi - s2) / s3) * s_ga[e][k];
                den_s += s_gabs[e][k] / s3;
            }
            if den_w > guard {
                let w = params.w_mot.get(j, k) + cfg.eta * num_w / (den_w + guard);
                params.w_mot.set(j, k, w);
                let s = sigma + cfg.eta_sigma * num_s / (den_s + guard);
                params.sigma_mot.set(j, k, s);
            }
        }
    }
    params.clamp_sigma(cfg.sigma_min, cfg.sigma_max);
}

/// Unmasked step on the premotor cross weights. The gradient weight of entry
/// (i, k) aggregates the perturbed motor column: sum_j |w'_mot[j][i]| * b_k.
pub fn update_supplementary(
    params: &mut LearnableParams,
    topo: &Topology,
    replay: &ReplayBuffer,
    adv: &Advantages,
    cfg: &LearnConfig,
) {
    if replay.is_empty() {
        return;
    }
    let n_c = params.n_c();
    let n_a = params.w_mot.rows();
    let guard = cfg.standardize_guard;
    let cross = LearnableParams::cross_entries(topo);
    if cross.is_empty() {
        return;
    }

    let episodes: Vec<&EpisodeTrace> = replay.iter().collect();
    // Advantage mass carried by each basis, and the perturbed motor column
    // magnitudes, per episode.
    let mut s_ba = vec![vec![0.0; n_c]; episodes.len()];
    let mut s_babs = vec![vec![0.0; n_c]; episodes.len()];
    let mut wsum = vec![vec![0.0; n_c]; episodes.len()];
    for (e, tr) in episodes.iter().enumerate() {
        for (t, s) in tr.states.iter().enumerate() {
            let a = adv.per_episode[e][t];
            for k in 0..n_c {
                s_ba[e][k] += s.b[k] * a;
                s_babs[e][k] += s.b[k] * a.abs();
            }
        }
        for i in 0..n_c {
            let mut acc = 0.0;
            for j in 0..n_a {
                acc += (params.w_mot.get(j, i) + tr.perturbation.d_mot.get(j, i)).abs();
            }
            wsum[e][i] = acc;
        }
    }

    for &(i, k) in &cross {
        let sigma = params.sigma_sup.get(i, k);
        if sigma <= 0.0 {
            continue;
        }
        let s2 = sigma * sigma;
        let s3 = s2 * sigma;
        let mut num_w = 0.0;
        let mut den_w = 0.0;
        let mut num_s = 0.0;
        let mut den_s = 0.0;
        for (e, _) in episodes.iter().enumerate() {
            let xi = episodes[e].perturbation.d_sup.get(i, k);
            let g_ga = wsum[e][i] * s_ba[e][k];
            let g_gabs = wsum[e][i] * s_babs[e][k];
            num_w += (xi / s2) * g_ga;
            den_w += g_gabs / s2;
            num_s += ((xi * xi - s2) / s3) * g_ga;
            den_s += g_gabs / s3;
        }
        if den_w > guard {
            let w = params.w_sup.get(i, k) + cfg.eta * num_w / (den_w + guard);
            params.w_sup.set(i, k, w);
            let s = sigma + cfg.eta_sigma * num_s / (den_s + guard);
            params.sigma_sup.set(i, k, s);
        }
    }
    params.clamp_sigma(cfg.sigma_min, cfg.sigma_max);
}

// ---------------------------------------------------------------------------
// Supervised fits: value, deviations, observations, classifier.
//
// The losses are means over the buffer samples, and every step is divided by
// the mean squared feature magnitude, so the tuned rates behave like fraction-
// of-the-gap closures independent of episode length or basis scale. Value and
// deviation fits use only full-horizon windows: the per-step rate learned
// there makes truncated end-of-episode windows consistent automatically.
// ---------------------------------------------------------------------------

/// Timesteps of `tr` whose return window is not truncated. Falls back to the
/// whole episode when the horizon exceeds the episode.
fn full_window_range(tr: &EpisodeTrace, horizon: usize) -> std::ops::Range<usize> {
    if tr.len() > horizon {
        0..(tr.len() - horizon)
    } else {
        0..tr.len()
    }
}

/// Windowed basis features for the value fit: X[k] = sum of b_k over the
/// return window at t.
fn value_features(tr: &EpisodeTrace, t: usize, horizon: usize, n_c: usize) -> Vec<f64> {
    let end = (t + horizon).min(tr.len() - 1);
    let mut x = vec![0.0; n_c];
    for s in &tr.states[t..=end] {
        for k in 0..n_c {
            x[k] += s.b[k];
        }
    }
    x
}

/// Mean squared error between the windowed value prediction and the return.
pub fn value_loss(params: &LearnableParams, replay: &ReplayBuffer, cfg: &LearnConfig) -> f64 {
    let n_c = params.n_c();
    let mut acc = 0.0;
    let mut n = 0usize;
    for tr in replay.iter() {
        for t in full_window_range(tr, cfg.horizon) {
            let x = value_features(tr, t, cfg.horizon, n_c);
            let sv: f64 = x.iter().zip(&params.w_val).map(|(a, b)| a * b).sum();
            let d = sv - tr.returns[t];
            acc += d * d;
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        acc / n as f64
    }
}

/// Analytic gradient of `value_loss` with respect to the value weights.
pub fn value_grad(params: &LearnableParams, replay: &ReplayBuffer, cfg: &LearnConfig) -> Vec<f64> {
    let n_c = params.n_c();
    let mut grad = vec![0.0; n_c];
    let mut n = 0usize;
    for tr in replay.iter() {
        for t in full_window_range(tr, cfg.horizon) {
            let x = value_features(tr, t, cfg.horizon, n_c);
            let sv: f64 = x.iter().zip(&params.w_val).map(|(a, b)| a * b).sum();
            let d = sv - tr.returns[t];
            for k in 0..n_c {
                grad[k] += 2.0 * d * x[k];
            }
            n += 1;
        }
    }
    if n > 0 {
        grad.iter_mut().for_each(|g| *g /= n as f64);
    }
    grad
}

/// Per-episode max deviation of the return from the windowed prediction:
/// the target the value band learns to reproduce.
fn value_deviation_targets(
    params: &LearnableParams,
    replay: &ReplayBuffer,
    cfg: &LearnConfig,
) -> Vec<f64> {
    replay
        .iter()
        .map(|tr| {
            full_window_range(tr, cfg.horizon)
                .map(|t| {
                    let x = value_features(tr, t, cfg.horizon, params.n_c());
                    let sv: f64 = x.iter().zip(&params.w_val).map(|(a, b)| a * b).sum();
                    (tr.returns[t] - sv).abs()
                })
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Mean squared error between the value band and the per-episode max
/// deviation target. Targets are treated as constants.
pub fn valdev_loss(params: &LearnableParams, replay: &ReplayBuffer, cfg: &LearnConfig) -> f64 {
    let targets = value_deviation_targets(params, replay, cfg);
    let mut acc = 0.0;
    let mut n = 0usize;
    for (tr, tgt) in replay.iter().zip(&targets) {
        for t in full_window_range(tr, cfg.horizon) {
            let band = tr.states[t]
                .b
                .iter()
                .zip(&params.w_valdev)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                .max(params.eps_v);
            let d = band - tgt;
            acc += d * d;
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        acc / n as f64
    }
}

/// Gradient of `valdev_loss`; zero where the band sits on its floor.
pub fn valdev_grad(params: &LearnableParams, replay: &ReplayBuffer, cfg: &LearnConfig) -> Vec<f64> {
    let n_c = params.n_c();
    let targets = value_deviation_targets(params, replay, cfg);
    let mut grad = vec![0.0; n_c];
    let mut n = 0usize;
    for (tr, tgt) in replay.iter().zip(&targets) {
        for t in full_window_range(tr, cfg.horizon) {
            let lin: f64 = tr.states[t]
                .b
                .iter()
                .zip(&params.w_valdev)
                .map(|(a, b)| a * b)
                .sum();
            n += 1;
            if lin <= params.eps_v {
                continue;
            }
            let d = lin - tgt;
            for k in 0..n_c {
                grad[k] += 2.0 * d * tr.states[t].b[k];
            }
        }
    }
    if n > 0 {
        grad.iter_mut().for_each(|g| *g /= n as f64);
    }
    grad
}

/// Mean squared observation-prediction error, summed over channels.
pub fn obs_loss(params: &LearnableParams, replay: &ReplayBuffer) -> f64 {
    let mut acc = 0.0;
    let mut n = 0usize;
    for tr in replay.iter() {
        for s in &tr.states {
            let o = params.w_obs.matvec(&s.b);
            for (oi, fi) in o.iter().zip(&s.fb) {
                let d = oi - fi;
                acc += d * d;
            }
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        acc / n as f64
    }
}

/// Gradient of `obs_loss` with respect to the observation weights.
pub fn obs_grad(params: &LearnableParams, replay: &ReplayBuffer) -> Mat {
    let n_c = params.n_c();
    let n_fb = params.w_obs.rows();
    let mut grad = Mat::zeros(n_fb, n_c);
    let mut n = 0usize;
    for tr in replay.iter() {
        for s in &tr.states {
            let o = params.w_obs.matvec(&s.b);
            for i in 0..n_fb {
                let d = o[i] - s.fb[i];
                for k in 0..n_c {
                    grad.set(i, k, grad.get(i, k) + 2.0 * d * s.b[k]);
                }
            }
            n += 1;
        }
    }
    if n > 0 {
        let scale = 1.0 / n as f64;
        for i in 0..n_fb {
            for k in 0..n_c {
                grad.set(i, k, grad.get(i, k) * scale);
            }
        }
    }
    grad
}

/// Per-(episode, channel) max deviation of the feedback from its prediction.
fn obs_deviation_targets(params: &LearnableParams, replay: &ReplayBuffer) -> Vec<Vec<f64>> {
    let n_fb = params.w_obs.rows();
    replay
        .iter()
        .map(|tr| {
            let mut tgt = vec![0.0f64; n_fb];
            for s in &tr.states {
                let o = params.w_obs.matvec(&s.b);
                for i in 0..n_fb {
                    tgt[i] = tgt[i].max((s.fb[i] - o[i]).abs());
                }
            }
            tgt
        })
        .collect()
}

/// Mean squared error between the observation bands and the per-episode max
/// deviations.
pub fn obsdev_loss(params: &LearnableParams, replay: &ReplayBuffer) -> f64 {
    let targets = obs_deviation_targets(params, replay);
    let n_fb = params.w_obs.rows();
    let mut acc = 0.0;
    let mut n = 0usize;
    for (tr, tgt) in replay.iter().zip(&targets) {
        for s in &tr.states {
            let lin = params.w_obsdev.matvec(&s.b);
            for i in 0..n_fb {
                let band = lin[i].max(params.eps_o);
                let d = band - tgt[i];
                acc += d * d;
            }
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        acc / n as f64
    }
}

/// Gradient of `obsdev_loss`; rows clamped at the floor contribute nothing.
pub fn obsdev_grad(params: &LearnableParams, replay: &ReplayBuffer) -> Mat {
    let targets = obs_deviation_targets(params, replay);
    let n_c = params.n_c();
    let n_fb = params.w_obs.rows();
    let mut grad = Mat::zeros(n_fb, n_c);
    let mut n = 0usize;
    for (tr, tgt) in replay.iter().zip(&targets) {
        for s in &tr.states {
            let lin = params.w_obsdev.matvec(&s.b);
            for i in 0..n_fb {
                if lin[i] <= params.eps_o {
                    continue;
                }
                let d = lin[i] - tgt[i];
                for k in 0..n_c {
                    grad.set(i, k, grad.get(i, k) + 2.0 * d * s.b[k]);
                }
            }
            n += 1;
        }
    }
    if n > 0 {
        let scale = 1.0 / n as f64;
        for i in 0..n_fb {
            for k in 0..n_c {
                grad.set(i, k, grad.get(i, k) * scale);
            }
        }
    }
    grad
}

/// Mean squared feature magnitude used to normalize a fit step.
fn feature_scale<'a>(features: impl Iterator<Item = &'a [f64]>) -> f64 {
    let mut acc = 0.0;
    let mut n = 0usize;
    for x in features {
        acc += x.iter().map(|v| v * v).sum::<f64>();
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        acc / n as f64
    }
}

/// One supervised step on every predictor: value, value band, observations,
/// observation bands. Deviation weights move at a tenth of their predictor's
/// rate so a single outlier episode cannot blow the bands open.
pub fn fit_predictors(params: &mut LearnableParams, replay: &ReplayBuffer, cfg: &LearnConfig) {
    if replay.is_empty() {
        return;
    }
    let n_c = params.n_c();
    let guard = 1e-8;

    // Value: features are windowed basis sums.
    let mut val_feats: Vec<Vec<f64>> = Vec::new();
    for tr in replay.iter() {
        for t in full_window_range(tr, cfg.horizon) {
            val_feats.push(value_features(tr, t, cfg.horizon, n_c));
        }
    }
    let z_val = feature_scale(val_feats.iter().map(|v| v.as_slice())) + guard;
    let g = value_grad(params, replay, cfg);
    for k in 0..n_c {
        params.w_val[k] -= cfg.eta_v * g[k] / z_val;
    }

    // Deviation and observation fits share the plain basis feature scale.
    let mut basis_feats: Vec<&[f64]> = Vec::new();
    for tr in replay.iter() {
        for s in &tr.states {
            basis_feats.push(&s.b);
        }
    }
    let z_b = feature_scale(basis_feats.into_iter()) + guard;

    let g = valdev_grad(params, replay, cfg);
    for k in 0..n_c {
        params.w_valdev[k] -= cfg.eta_v * cfg.eta_dev_scale * g[k] / z_b;
    }

    let g = obs_grad(params, replay);
    for i in 0..params.w_obs.rows() {
        for k in 0..n_c {
            let w = params.w_obs.get(i, k) - cfg.eta_o * g.get(i, k) / z_b;
            params.w_obs.set(i, k, w);
        }
    }

    let g = obsdev_grad(params, replay);
    for i in 0..params.w_obsdev.rows() {
        for k in 0..n_c {
            let w = params.w_obsdev.get(i, k) - cfg.eta_o * cfg.eta_dev_scale * g.get(i, k) / z_b;
            params.w_obsdev.set(i, k, w);
        }
    }
}

/// Template/target pairs for the classifier: each subnetwork's observation
/// template columns should score 1 on that subnetwork's neurons and 0
/// elsewhere.
fn classifier_pairs(params: &LearnableParams, topo: &Topology) -> Vec<(Vec<f64>, usize)> {
    let mut pairs = Vec::new();
    for (s, &(a, b)) in topo.subnets().iter().enumerate() {
        for k in a..b {
            let template: Vec<f64> = (0..params.w_obs.rows())
                .map(|i| params.w_obs.get(i, k))
                .collect();
            pairs.push((template, s));
        }
    }
    pairs
}

/// Mean sigmoid cross-entropy of the classifier over the template pairs.
pub fn classifier_loss(params: &LearnableParams, topo: &Topology) -> f64 {
    let pairs = classifier_pairs(params, topo);
    if pairs.is_empty() {
        return 0.0;
    }
    let n_c = params.n_c();
    let mut acc = 0.0;
    for (x, s) in &pairs {
        let z = params.w_cls.matvec(x);
        for i in 0..n_c {
            let zi = z[i] + params.b_cls[i];
            let y = f64::from(topo.subnet_of(i) == *s);
            // log(1 + exp(-|z|)) form keeps the loss finite for large |z|.
            let soft = (1.0 + (-zi.abs()).exp()).ln() + zi.max(0.0);
            acc += soft - y * zi;
        }
    }
    acc / pairs.len() as f64
}

/// Analytic gradient of `classifier_loss` for the weights and biases.
pub fn classifier_grad(params: &LearnableParams, topo: &Topology) -> (Mat, Vec<f64>) {
    let pairs = classifier_pairs(params, topo);
    let n_c = params.n_c();
    let n_fb = params.w_cls.cols();
    let mut gw = Mat::zeros(n_c, n_fb);
    let mut gb = vec![0.0; n_c];
    if pairs.is_empty() {
        return (gw, gb);
    }
    for (x, s) in &pairs {
        let z = params.w_cls.matvec(x);
        for i in 0..n_c {
            let p = crate::mat::sigmoid(z[i] + params.b_cls[i]);
            let y = f64::from(topo.subnet_of(i) == *s);
            let d = p - y;
            for c in 0..n_fb {
                gw.set(i, c, gw.get(i, c) + d * x[c]);
            }
            gb[i] += d;
        }
    }
    let scale = 1.0 / pairs.len() as f64;
    for i in 0..n_c {
        for c in 0..n_fb {
            gw.set(i, c, gw.get(i, c) * scale);
        }
        gb[i] *= scale;
    }
    (gw, gb)
}

/// One epoch of cross-entropy descent on the classifier against the current
/// observation templates. A no-op until any template has been learned.
pub fn fit_classifier(params: &mut LearnableParams, topo: &Topology, cfg: &LearnConfig) {
    if params.w_obs.max_abs() == 0.0 {
        return;
    }
    let (gw, gb) = classifier_grad(params, topo);
    for i in 0..params.n_c() {
        for c in 0..params.w_cls.cols() {
            let w = params.w_cls.get(i, c) - cfg.eta_o * gw.get(i, c);
            params.w_cls.set(i, c, w);
        }
        params.b_cls[i] -= cfg.eta_o * gb[i];
    }
}

/// Per-subnetwork activity fractions (primary) and premotor mixing fractions
/// (supplementary). Both vectors sum to 1 when defined.
pub fn contributions(
    b: &[f64],
    params: &LearnableParams,
    topo: &Topology,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let total_b: f64 = b.iter().sum();
    if total_b <= 0.0 {
        return Err(CoreError::UndefinedContribution(
            "basis activity sums to zero".into(),
        ));
    }
    let n_subs = topo.n_subnets();
    let mut primary = vec![0.0; n_subs];
    for (k, &bk) in b.iter().enumerate() {
        primary[topo.subnet_of(k)] += bk;
    }
    primary.iter_mut().for_each(|p| *p /= total_b);

    let n_c = topo.n_c();
    let mut per_sub = vec![0.0; n_subs];
    let mut total_w = 0.0;
    for j in 0..n_c {
        let s = topo.subnet_of(j);
        for k in 0..n_c {
            let w = (params.w_sup.get(j, k) * b[k]).abs();
            per_sub[s] += w;
            total_w += w;
        }
    }
    if total_w <= 0.0 {
        return Err(CoreError::UndefinedContribution(
            "premotor mixing mass is zero".into(),
        ));
    }
    per_sub.iter_mut().for_each(|p| *p /= total_w);
    Ok((primary, per_sub))
}
