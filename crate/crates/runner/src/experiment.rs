//! The episode loop: roll out, learn, watch for novelty, grow, and record.

use std::fs::File;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ringlearn_core::envsim::{schedule_condition, SurrogateEnv};
use ringlearn_core::graphviz::export_behavior_graph;
use ringlearn_core::growth::{grow_subnetwork, TransferStyle};
use ringlearn_core::learning::{
    compute_advantages, contributions, fit_classifier, fit_predictors, sample_parameters,
    update_primary, update_supplementary, ReplayBuffer, REPLAY_CAPACITY,
};
use ringlearn_core::network::{argmax, NetworkState};
use ringlearn_core::novelty::detect_novelty;
use ringlearn_core::params::LearnableParams;
use ringlearn_core::topology::Topology;
use ringlearn_core::weights::{build_fixed_weights, FixedWeights};
use ringlearn_core::envsim::rollout_episode;

use crate::config::ExperimentConfig;
use crate::metrics::{mean_basis, trace_stats, MetricsRow};
use crate::snapshot::{snapshot_load, snapshot_save, Snapshot, SNAPSHOT_VERSION};
use crate::{Result, RunnerError};

/// Everything a finished (or resumed) run leaves behind.
#[derive(Debug)]
pub struct RunOutput {
    pub out_dir: PathBuf,
    pub metrics_path: PathBuf,
    pub events_path: PathBuf,
    pub snapshot_path: PathBuf,
    pub behavior_path: PathBuf,
    pub rows: Vec<MetricsRow>,
    pub growth_episodes: Vec<usize>,
}

/// Live run state; exactly what a snapshot captures.
struct Live {
    topo: Topology,
    fixed: FixedWeights,
    params: LearnableParams,
    replay: ReplayBuffer,
    net_state: NetworkState,
    rng: ChaCha8Rng,
    grace_remaining: usize,
    last_active_sub: usize,
    growth_count: usize,
}

impl Live {
    fn fresh(config: &ExperimentConfig) -> Result<Self> {
        let net = &config.network;
        let topo = if net.initial_subnetworks == 1 {
            Topology::single_ring(
                ringlearn_core::topology::SUBNET_SIZE,
                net.tau,
                net.n_fb,
                net.n_actions,
            )?
        } else {
            Topology::disconnected_rings(net.initial_subnetworks, net.tau, net.n_fb, net.n_actions)?
        };
        let fixed = build_fixed_weights(&topo, &config.boundary)?;
        let params = LearnableParams::new(&topo, config.learn.sigma_max);
        let net_state = NetworkState::initial(&topo, &params);
        Ok(Live {
            topo,
            fixed,
            params,
            replay: ReplayBuffer::new(REPLAY_CAPACITY),
            net_state,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            // The startup network is as unfitted as a fresh growth; give the
            // predictors the same settling window.
            grace_remaining: config.grace_episodes,
            last_active_sub: 0,
            growth_count: 0,
        })
    }

    fn from_snapshot(snap: Snapshot) -> Result<Self> {
        let fixed = build_fixed_weights(&snap.topo, &snap.boundary)?;
        Ok(Live {
            fixed,
            topo: snap.topo,
            params: snap.params,
            replay: snap.replay,
            net_state: snap.net_state,
            rng: snap.rng,
            grace_remaining: snap.grace_remaining,
            last_active_sub: snap.last_active_sub,
            growth_count: snap.growth_count,
        })
    }

    fn to_snapshot(&self, config: &ExperimentConfig, next_episode: usize) -> Snapshot {
        Snapshot {
            format_version: SNAPSHOT_VERSION,
            episode: next_episode,
            topo: self.topo.clone(),
            boundary: config.boundary,
            params: self.params.clone(),
            replay: self.replay.clone(),
            net_state: self.net_state.clone(),
            rng: self.rng.clone(),
            grace_remaining: self.grace_remaining,
            last_active_sub: self.last_active_sub,
            growth_count: self.growth_count,
        }
    }
}

/// Run a fresh experiment into `out_dir`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<RunOutput> {
    config.validate()?;
    let live = Live::fresh(config)?;
    run_from(live, 0, config, out_dir)
}

/// Continue a snapshotted experiment until the configured episode count.
pub fn resume_experiment(
    config: &ExperimentConfig,
    out_dir: &Path,
    snapshot_path: &Path,
) -> Result<RunOutput> {
    config.validate()?;
    let snap = snapshot_load(snapshot_path)?;
    let start = snap.episode;
    if start >= config.episodes {
        return Err(RunnerError::Snapshot(format!(
            "snapshot is already at episode {start} of {}",
            config.episodes
        )));
    }
    let live = Live::from_snapshot(snap)?;
    run_from(live, start, config, out_dir)
}

fn run_from(
    mut live: Live,
    start_episode: usize,
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<RunOutput> {
    std::fs::create_dir_all(out_dir).map_err(|e| RunnerError::io(out_dir, e))?;
    let metrics_path = out_dir.join("metrics.csv");
    let events_path = out_dir.join("events.log");
    let snapshot_path = out_dir.join("snapshot.json");
    let behavior_path = out_dir.join("behavior.dot");

    let mut metrics = csv::WriterBuilder::new()
        .from_path(&metrics_path)
        .map_err(RunnerError::from)?;
    metrics.write_record(MetricsRow::header(config.contrib_slots))?;
    let mut events = File::create(&events_path).map_err(|e| RunnerError::io(&events_path, e))?;

    let sched = config.schedule_table();
    let gains = config.torque_gain_vec();
    let cfg = &config.learn;
    let mut rows = Vec::with_capacity(config.episodes - start_episode);
    let mut growth_episodes = Vec::new();
    let mut prev_condition = String::new();

    for episode in start_episode..config.episodes {
        let cond_id = schedule_condition(episode, &sched)?.to_string();
        if cond_id != prev_condition {
            writeln!(events, "episode={episode} event=condition_switch condition={cond_id}")
                .map_err(|e| RunnerError::io(&events_path, e))?;
            prev_condition = cond_id.clone();
        }
        let cond = config
            .condition(&cond_id)
            .ok_or_else(|| RunnerError::Config(format!("unknown condition '{cond_id}'")))?;

        // Explore, roll out, remember.
        let (explored, pert) = sample_parameters(
            &live.params,
            &live.topo,
            &mut live.rng,
            !config.ablation.disable_supplementary,
        );
        let mut env = SurrogateEnv::new(cond.clone(), config.network.n_actions);
        let trace = rollout_episode(
            &mut live.net_state,
            &mut env,
            &live.topo,
            &live.fixed,
            &explored,
            pert,
            config.reward_mode,
            cfg.horizon,
            config.timesteps_per_episode,
            &gains,
            &cond_id,
            &mut live.rng,
        )?;
        live.replay.push(trace);

        // Fits and updates, in their fixed order.
        fit_predictors(&mut live.params, &live.replay, cfg);
        fit_classifier(&mut live.params, &live.topo, cfg);
        let adv = compute_advantages(&live.replay, cfg);
        update_primary(&mut live.params, &live.replay, &adv, cfg);
        if !config.ablation.disable_supplementary {
            update_supplementary(&mut live.params, &live.topo, &live.replay, &adv, cfg);
        }

        // Episode aggregates.
        let latest = live.replay.latest().expect("just pushed");
        let stats = trace_stats(latest, cfg.horizon);
        let mb = mean_basis(latest);
        let (mut pri, mut sup) = contributions(&mb, &live.params, &live.topo)?;
        let active_sub = {
            let mut best = 0;
            for (s, v) in pri.iter().enumerate() {
                if *v > pri[best] {
                    best = s;
                }
            }
            best
        };
        if active_sub != live.last_active_sub {
            writeln!(
                events,
                "episode={episode} event=subnet_switch from={} to={active_sub}",
                live.last_active_sub
            )
            .map_err(|e| RunnerError::io(&events_path, e))?;
            live.grace_remaining = config.grace_episodes;
            live.last_active_sub = active_sub;
        }

        // Novelty check and growth, skipped during grace windows.
        let mut grew = 0u8;
        let under_cap = config
            .growth_cap
            .map_or(true, |cap| live.topo.n_subnets() < cap);
        if live.grace_remaining > 0 {
            live.grace_remaining -= 1;
        } else if !config.ablation.disable_neurogenesis && under_cap {
            let latest = live.replay.latest().expect("just pushed");
            let evidence = detect_novelty(latest, cfg.horizon)?;
            if let Some(t_co) = evidence.co_occurrence {
                let k_star = argmax(&latest.states[t_co].b);
                let donor_sub = live.topo.subnet_of(k_star);
                let phase = live.topo.ring_position(k_star);
                let style = if config.ablation.naive_transfer {
                    TransferStyle::FromFirst
                } else {
                    TransferStyle::Direct
                };
                let growth = grow_subnetwork(
                    &live.topo,
                    &live.params,
                    &config.boundary,
                    donor_sub,
                    phase,
                    config.network.tau,
                    cfg.sigma_max,
                    style,
                )?;
                if growth.topo.n_subnets() > config.contrib_slots {
                    return Err(RunnerError::Config(format!(
                        "grew to {} subnetworks; raise contrib_slots",
                        growth.topo.n_subnets()
                    )));
                }
                live.topo = growth.topo;
                live.fixed = growth.fixed;
                live.params = growth.params;
                live.net_state = live.net_state.extended(&live.topo);
                live.replay.extend_for(&live.topo);
                live.growth_count += 1;
                live.grace_remaining = config.grace_episodes;
                grew = 1;
                growth_episodes.push(episode);
                writeln!(
                    events,
                    "episode={episode} event=growth new_sub={} donor={donor_sub} phase={phase} t={t_co}",
                    live.topo.n_subnets() - 1
                )
                .map_err(|e| RunnerError::io(&events_path, e))?;
                pri.resize(live.topo.n_subnets(), 0.0);
                sup.resize(live.topo.n_subnets(), 0.0);
            }
        }

        let row = MetricsRow {
            episode,
            condition_id: cond_id,
            mean_return: stats.mean_return,
            min_return: stats.min_return,
            value_pred: stats.mean_value_pred,
            value_band_lo: stats.mean_band_lo,
            active_subnetwork: active_sub,
            n_subnets: live.topo.n_subnets(),
            primary_contrib: pri,
            supplementary_contrib: sup,
            grew,
        };
        metrics.write_record(row.record(config.contrib_slots))?;
        rows.push(row);

        if config.snapshot_every > 0 && (episode + 1) % config.snapshot_every == 0 {
            let snap = live.to_snapshot(config, episode + 1);
            snapshot_save(&snap, &out_dir.join(format!("snapshot_ep{}.json", episode + 1)))?;
        }
    }

    metrics.flush().map_err(|e| RunnerError::io(&metrics_path, e))?;
    snapshot_save(&live.to_snapshot(config, config.episodes), &snapshot_path)?;
    let dot = export_behavior_graph(&live.topo, &live.params)?;
    std::fs::write(&behavior_path, dot).map_err(|e| RunnerError::io(&behavior_path, e))?;

    Ok(RunOutput {
        out_dir: out_dir.to_path_buf(),
        metrics_path,
        events_path,
        snapshot_path,
        behavior_path,
        rows,
        growth_episodes,
    })
}
