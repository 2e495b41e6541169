//! Lossless run persistence: a versioned JSON document with explicit field
//! names and shortest-round-trip decimal floats, so save -> load -> save is
//! byte-identical and a resumed run replays the exact trajectory.

use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use ringlearn_core::boundary::BoundaryParams;
use ringlearn_core::learning::ReplayBuffer;
use ringlearn_core::network::NetworkState;
use ringlearn_core::params::LearnableParams;
use ringlearn_core::topology::Topology;

use crate::{Result, RunnerError};

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub format_version: u32,
    /// Next episode to run.
    pub episode: usize,
    pub topo: Topology,
    pub boundary: BoundaryParams,
    pub params: LearnableParams,
    pub replay: ReplayBuffer,
    pub net_state: NetworkState,
    pub rng: ChaCha8Rng,
    pub grace_remaining: usize,
    pub last_active_sub: usize,
    pub growth_count: usize,
}

pub fn snapshot_save(snapshot: &Snapshot, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(snapshot)
        .map_err(|e| RunnerError::Snapshot(format!("serialize: {e}")))?;
    std::fs::write(path, text.as_bytes()).map_err(|e| RunnerError::io(path, e))?;
    Ok(())
}

pub fn snapshot_load(path: &Path) -> Result<Snapshot> {
    let text = std::fs::read_to_string(path).map_err(|e| RunnerError::io(path, e))?;
    let snap: Snapshot = serde_json::from_str(&text)
        .map_err(|e| RunnerError::Snapshot(format!("{}: corrupt snapshot: {e}", path.display())))?;
    if snap.format_version != SNAPSHOT_VERSION {
        return Err(RunnerError::Snapshot(format!(
            "unsupported format version {} (expected {SNAPSHOT_VERSION})",
            snap.format_version
        )));
    }
    Ok(snap)
}
