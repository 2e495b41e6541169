use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ringlearn_core::demo::{program_from_demonstration, Demonstration};
use ringlearn_core::graphviz::export_behavior_graph;
use ringlearn_core::learning::{ReplayBuffer, REPLAY_CAPACITY};
use ringlearn_core::network::NetworkState;
use ringlearn_core::params::LearnableParams;
use ringlearn_runner::snapshot::{snapshot_load, snapshot_save, Snapshot, SNAPSHOT_VERSION};
use ringlearn_runner::{resume_experiment, run_experiment, ExperimentConfig};

/// Continual locomotion-learning sandbox: growable ring-network controllers
/// trained online against a surrogate environment.
#[derive(Parser)]
#[command(name = "ringlearn", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment described by a TOML config.
    Run {
        /// Experiment configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for metrics.csv, events.log, snapshots, and
        /// behavior.dot.
        #[arg(long)]
        out: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Continue from a snapshot instead of starting fresh.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Render the behavior graph of a snapshot as DOT text.
    ExportGraph {
        #[arg(long)]
        snapshot: PathBuf,
        /// Output DOT file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Program a ring network from a demonstration trajectory (CSV, one row
    /// per sample, one column per joint).
    Demo {
        #[arg(long)]
        input: PathBuf,
        /// Sliding window length in samples.
        #[arg(long, default_value_t = 120)]
        window: usize,
        /// Structure-search iterations per window.
        #[arg(long = "max-iter", default_value_t = 30)]
        max_iter: usize,
        /// Neurons in each window's ring.
        #[arg(long = "ring-size", default_value_t = 4)]
        ring_size: usize,
        /// Acceptable DTW error per window.
        #[arg(long, default_value_t = 5.0)]
        tol: f64,
        /// Output directory for the network file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Seconds between demonstration samples (informational).
        #[arg(long = "sample-period", default_value_t = 0.05)]
        sample_period: f64,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Run {
            config,
            out,
            seed,
            resume,
        } => {
            let mut cfg = ExperimentConfig::load(&config)
                .with_context(|| format!("loading config {}", config.display()))?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let output = match resume {
                Some(snap) => resume_experiment(&cfg, &out, &snap)?,
                None => run_experiment(&cfg, &out)?,
            };
            println!(
                "run complete: {} episodes, {} growth events, metrics at {}",
                output.rows.len(),
                output.growth_episodes.len(),
                output.metrics_path.display()
            );
            Ok(())
        }
        Cmd::ExportGraph { snapshot, out } => {
            let snap = snapshot_load(&snapshot)
                .with_context(|| format!("loading snapshot {}", snapshot.display()))?;
            let dot = export_behavior_graph(&snap.topo, &snap.params)?;
            std::fs::write(&out, dot)
                .with_context(|| format!("writing {}", out.display()))?;
            println!("behavior graph written to {}", out.display());
            Ok(())
        }
        Cmd::Demo {
            input,
            window,
            max_iter,
            ring_size,
            tol,
            out,
            seed,
            sample_period,
        } => {
            let demo = read_demonstration(&input, sample_period)
                .with_context(|| format!("reading demonstration {}", input.display()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let result =
                program_from_demonstration(&demo, window, max_iter, ring_size, tol, &mut rng)?;
            std::fs::create_dir_all(&out)
                .with_context(|| format!("creating {}", out.display()))?;

            // Package the programmed network as a regular snapshot so
            // export-graph (and a resumed run) can consume it.
            let mut params = LearnableParams::new(&result.topo, 0.0);
            params.w_mot = result.w_mot.clone();
            let net_state = NetworkState::initial(&result.topo, &params);
            let snap = Snapshot {
                format_version: SNAPSHOT_VERSION,
                episode: 0,
                topo: result.topo.clone(),
                boundary: ringlearn_core::boundary::BoundaryParams::default(),
                params,
                replay: ReplayBuffer::new(REPLAY_CAPACITY),
                net_state,
                rng,
                grace_remaining: 0,
                last_active_sub: 0,
                growth_count: 0,
            };
            let net_path = out.join("network.json");
            snapshot_save(&snap, &net_path)?;
            println!(
                "programmed {} neurons over {} samples; final DTW error {:.4}; {} windows skipped; network at {}",
                result.topo.n_c(),
                demo.len(),
                result.final_error,
                result.skipped_windows.len(),
                net_path.display()
            );
            Ok(())
        }
    }
}

fn read_demonstration(path: &PathBuf, sample_period: f64) -> Result<Demonstration> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut samples = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row: std::result::Result<Vec<f64>, _> =
            record.iter().map(|f| f.parse::<f64>()).collect();
        samples.push(row.with_context(|| format!("non-numeric CSV row {:?}", record))?);
    }
    if samples.is_empty() {
        bail!("demonstration {} is empty", path.display());
    }
    Ok(Demonstration {
        samples,
        sample_period,
    })
}
