//! New-condition detection from prediction mismatches.
//!
//! A fresh skill is warranted only when the return falls below the learned
//! value band AND some feedback channel escapes its learned observation band
//! at the same timestep. Either breach alone is handled by widening the
//! corresponding band instead of growing.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::learning::EpisodeTrace;

/// Breach evidence collected from one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoveltyEvidence {
    /// First timestep where the return fell below the value band, if any.
    pub value_breach: Option<usize>,
    /// First (timestep, channel) where feedback escaped its band, if any.
    pub obs_breach: Option<(usize, usize)>,
    /// First timestep where both predicates held together, if any.
    pub co_occurrence: Option<usize>,
}

impl NoveltyEvidence {
    pub fn triggers_growth(&self) -> bool {
        self.co_occurrence.is_some()
    }
}

/// Evaluate the breach predicates over a whole episode. The value side
/// compares the return against the windowed value prediction so both live in
/// the same units.
pub fn detect_novelty(trace: &EpisodeTrace, horizon: usize) -> Result<NoveltyEvidence> {
    if trace.is_empty() {
        return Err(CoreError::EmptyTrace);
    }
    let mut value_breach = None;
    let mut obs_breach = None;
    let mut co_occurrence = None;

    for (t, state) in trace.states.iter().enumerate() {
        let value_hit = trace.returns[t] < trace.predicted_return(t, horizon) - state.vdev;
        let obs_hit = state
            .fb
            .iter()
            .zip(&state.o)
            .zip(&state.odev)
            .position(|((fb, o), dev)| (fb - o).abs() > *dev);

        if value_hit && value_breach.is_none() {
            value_breach = Some(t);
        }
        if let Some(ch) = obs_hit {
            if obs_breach.is_none() {
                obs_breach = Some((t, ch));
            }
            if value_hit && co_occurrence.is_none() {
                co_occurrence = Some(t);
            }
        }
    }
    Ok(NoveltyEvidence {
        value_breach,
        obs_breach,
        co_occurrence,
    })
}
