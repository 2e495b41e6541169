//! Programming a ring network from a recorded trajectory.
//!
//! A sliding half-overlapping window walks the demonstration. Whenever the
//! accumulated network already replays the window within tolerance the window
//! is skipped; otherwise a fresh ring is fit to the window by least squares,
//! its structure is polished by a relaxed perturb-and-accept loop that
//! rewards smaller transition sets, and the first half of the result is
//! spliced into the accumulated ring.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::boundary::BoundaryParams;
use crate::error::{CoreError, Result};
use crate::linalg;
use crate::mat::Mat;
use crate::network::{network_forward, NetworkState};
use crate::params::LearnableParams;
use crate::topology::Topology;
use crate::weights::{build_fixed_weights, FixedWeights};

/// A recorded trajectory: one row per sample, one column per joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub samples: Vec<Vec<f64>>,
    /// Seconds between samples; informational.
    pub sample_period: f64,
}

impl Demonstration {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_actions(&self) -> usize {
        self.samples.first().map_or(0, |r| r.len())
    }

    pub fn validate(&self, window: usize) -> Result<()> {
        if self.samples.is_empty() || self.n_actions() == 0 {
            return Err(CoreError::InvalidDemonstration("no samples".into()));
        }
        if self.samples.iter().any(|r| r.len() != self.n_actions()) {
            return Err(CoreError::InvalidDemonstration("ragged rows".into()));
        }
        if self.samples.iter().flatten().any(|v| !v.is_finite()) {
            return Err(CoreError::InvalidDemonstration(
                "non-finite sample".into(),
            ));
        }
        if window > self.len() {
            return Err(CoreError::InvalidDemonstration(format!(
                "window {window} exceeds demonstration length {}",
                self.len()
            )));
        }
        Ok(())
    }
}

/// Relaxed transition matrix optimized by the structure search. Entries live
/// in [0, 1]; 0.5 is the binarization threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftTransition {
    pub t_bar: Mat,
}

impl SoftTransition {
    /// Start from a hard one-loop ring.
    pub fn ring(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.set(i, (i + 1) % n, 1.0);
        }
        SoftTransition { t_bar: m }
    }

    /// Count of entries at or above the binarization threshold.
    pub fn size(&self) -> usize {
        self.t_bar.data().iter().filter(|&&v| v >= 0.5).count()
    }

    /// Random structure proposal: each off-diagonal entry flips toward the
    /// opposite pole with probability 0.1 and takes Gaussian jitter of std
    /// 0.05; everything stays clipped to [0, 1].
    pub fn perturbed<R: Rng>(&self, rng: &mut R) -> SoftTransition {
        let n = self.t_bar.rows();
        let mut out = self.t_bar.clone();
        for r in 0..n {
            for c in 0..n {
                if r == c {
                    continue;
                }
                let mut v = out.get(r, c);
                if rng.gen::<f64>() < 0.1 {
                    v = if v >= 0.5 { 0.0 } else { 1.0 };
                }
                let z: f64 = rng.sample(StandardNormal);
                v = (v + 0.05 * z).clamp(0.0, 1.0);
                out.set(r, c, v);
            }
        }
        SoftTransition { t_bar: out }
    }

    /// Binarize and extract a valid single-cycle topology over the neurons
    /// that keep any transitions. Returns the surviving original indices in
    /// cycle order (starting from the lowest surviving index), or None when
    /// the binarized structure violates the topology rules.
    pub fn extract_cycle(&self) -> Option<Vec<usize>> {
        let n = self.t_bar.rows();
        let hard: Vec<Vec<bool>> = (0..n)
            .map(|r| (0..n).map(|c| self.t_bar.get(r, c) >= 0.5).collect())
            .collect();
        let used: Vec<usize> = (0..n)
            .filter(|&i| hard[i].iter().any(|&e| e) || (0..n).any(|r| hard[r][i]))
            .collect();
        if used.len() < 2 {
            return None;
        }
        // Every surviving neuron needs exactly one successor and one
        // predecessor among the survivors, and no dangling edges elsewhere.
        for &i in &used {
            if hard[i][i] {
                return None;
            }
            let succ: Vec<usize> = (0..n).filter(|&c| hard[i][c]).collect();
            let pred: Vec<usize> = (0..n).filter(|&r| hard[r][i]).collect();
            if succ.len() != 1 || pred.len() != 1 {
                return None;
            }
            if !used.contains(&succ[0]) || !used.contains(&pred[0]) {
                return None;
            }
        }
        let start = used[0];
        let mut order = vec![start];
        let mut cur = start;
        loop {
            let next = (0..n).find(|&c| hard[cur][c]).unwrap();
            if next == start {
                break;
            }
            if order.contains(&next) {
                return None; // lasso, not a cycle
            }
            order.push(next);
            cur = next;
        }
        if order.len() == used.len() {
            Some(order)
        } else {
            None
        }
    }
}

/// Dynamic-time-warping distance with L1 cost summed over action dimensions
/// and the symmetric match/insert/delete step pattern.
pub fn dtw_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(CoreError::EmptySequence);
    }
    let cost = |x: &[f64], y: &[f64]| -> f64 {
        x.iter().zip(y).map(|(p, q)| (p - q).abs()).sum()
    };
    let (na, nb) = (a.len(), b.len());
    let mut prev = vec![f64::INFINITY; nb + 1];
    let mut cur = vec![f64::INFINITY; nb + 1];
    prev[0] = 0.0;
    for i in 1..=na {
        cur[0] = f64::INFINITY;
        for j in 1..=nb {
            let c = cost(&a[i - 1], &b[j - 1]);
            cur[j] = c + prev[j].min(cur[j - 1]).min(prev[j - 1]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[nb])
}

/// Transition speed that makes one ring revolution span roughly `window`
/// steps: each of the `n0` phases must saturate its basis in window/n0 steps.
pub fn tau_for_window(window: usize, n0: usize) -> f64 {
    let phase_steps = (window as f64 / n0 as f64).max(1.0);
    (1.0 - 0.048f64.powf(1.0 / phase_steps)).clamp(0.02, 0.85)
}

/// A compiled ring ready to roll: topology, fixed weights, neutral params.
struct RingMachine {
    topo: Topology,
    fixed: FixedWeights,
    params: LearnableParams,
}

impl RingMachine {
    fn new(n: usize, tau: f64, n_actions: usize, w_mot: Option<Mat>) -> Result<Self> {
        let topo = Topology::single_ring(n, tau, 1, n_actions)?;
        let fixed = build_fixed_weights(&topo, &BoundaryParams::default())?;
        let mut params = LearnableParams::new(&topo, 0.0);
        if let Some(w) = w_mot {
            params.w_mot = w;
        }
        Ok(RingMachine {
            topo,
            fixed,
            params,
        })
    }

    /// Start state for demonstration replay: the seed basis begins saturated
    /// so the first key pose is emitted from step 0 instead of ramping in.
    fn start_state(&self) -> NetworkState {
        let mut state = NetworkState::initial(&self.topo, &self.params);
        state.b[0] = 1.0;
        state.pm = self.params.w_sup.matvec(&state.b);
        state.m = self.params.w_mot.matvec(&state.pm);
        state
    }

    /// Roll from the start state for `steps` ticks, returning the basis rows
    /// and motor rows (aligned with the pre-step state).
    fn roll(&self, steps: usize) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let fb = vec![0.0];
        let mut state = self.start_state();
        let mut bases = Vec::with_capacity(steps);
        let mut motors = Vec::with_capacity(steps);
        for _ in 0..steps {
            bases.push(state.b.clone());
            motors.push(state.m.clone());
            state = network_forward(&state, &fb, &self.topo, &self.fixed, &self.params)?;
        }
        Ok((bases, motors))
    }
}

/// Fit motor weights so a bare ring reproduces `segment`, returning the
/// weights and the DTW error of the generated trajectory.
pub fn fit_window(segment: &[Vec<f64>], n0: usize, tau: f64) -> Result<(Mat, f64)> {
    if segment.len() < n0 {
        return Err(CoreError::InvalidDemonstration(format!(
            "segment of {} samples cannot drive a {n0}-neuron ring",
            segment.len()
        )));
    }
    let n_actions = segment[0].len();
    let machine = RingMachine::new(n0, tau, n_actions, None)?;
    let (bases, _) = machine.roll(segment.len())?;

    let rows = bases.len();
    let mut flat = Vec::with_capacity(rows * n0);
    for b in &bases {
        flat.extend_from_slice(b);
    }
    let mut w = Mat::zeros(n_actions, n0);
    for j in 0..n_actions {
        let y: Vec<f64> = segment.iter().map(|s| s[j]).collect();
        let sol = linalg::lstsq(&flat, &y, rows, n0)?;
        for k in 0..n0 {
            w.set(j, k, sol[k]);
        }
    }

    let generated: Vec<Vec<f64>> = bases.iter().map(|b| w.matvec(b)).collect();
    let err = dtw_distance(segment, &generated)?;
    Ok((w, err))
}

/// Result of programming a network from a demonstration.
#[derive(Debug, Clone)]
pub struct ProgramResult {
    pub topo: Topology,
    pub w_mot: Mat,
    pub tau: f64,
    /// DTW error of the final network replayed against the demonstration.
    pub final_error: f64,
    /// Windows that were skipped because the replay already fit.
    pub skipped_windows: Vec<usize>,
}

/// Replay `machine` from its start state and compare `[offset, offset+len)`
/// of its output against `segment`.
fn replay_error(machine: &RingMachine, offset: usize, segment: &[Vec<f64>]) -> Result<f64> {
    let (_, motors) = machine.roll(offset + segment.len())?;
    dtw_distance(segment, &motors[offset..])
}

/// Candidate evaluation: replay the extracted cycle with the window's fitted
/// weights. Returns the DTW error and the mean activation per original
/// neuron.
fn eval_candidate(
    cycle: &[usize],
    w: &Mat,
    tau: f64,
    n0: usize,
    segment: &[Vec<f64>],
) -> Result<(f64, Vec<f64>)> {
    let n_actions = w.rows();
    let mut w_sub = Mat::zeros(n_actions, cycle.len());
    for (pos, &orig) in cycle.iter().enumerate() {
        for j in 0..n_actions {
            w_sub.set(j, pos, w.get(j, orig));
        }
    }
    let machine = RingMachine::new(cycle.len(), tau, n_actions, Some(w_sub))?;
    let fb = vec![0.0];
    let mut state = machine.start_state();
    let mut motors = Vec::with_capacity(segment.len());
    let mut act = vec![0.0; n0];
    for _ in 0..segment.len() {
        motors.push(state.m.clone());
        for (pos, &orig) in cycle.iter().enumerate() {
            act[orig] += state.c[pos];
        }
        state = network_forward(&state, &fb, &machine.topo, &machine.fixed, &machine.params)?;
    }
    act.iter_mut().for_each(|a| *a /= segment.len() as f64);
    let err = dtw_distance(segment, &motors)?;
    Ok((err, act))
}

/// Sliding-window structure optimization over a demonstration.
pub fn program_from_demonstration<R: Rng>(
    demo: &Demonstration,
    window: usize,
    max_iter: usize,
    n0: usize,
    tol: f64,
    rng: &mut R,
) -> Result<ProgramResult> {
    demo.validate(window)?;
    if max_iter < 1 {
        return Err(CoreError::InvalidDemonstration(
            "max_iter must be at least 1".into(),
        ));
    }
    if n0 < 4 || window < n0 {
        return Err(CoreError::InvalidDemonstration(
            "need a ring of at least 4 neurons and a window covering it".into(),
        ));
    }
    let n_actions = demo.n_actions();
    let tau = tau_for_window(window, n0);

    // Accumulated network: motor columns in chain order; the chain is kept
    // closed into a ring so replay is always well defined.
    let mut acc_cols: Vec<Vec<f64>> = Vec::new();
    let mut skipped = Vec::new();

    let acc_machine = |cols: &[Vec<f64>]| -> Result<RingMachine> {
        let mut w = Mat::zeros(n_actions, cols.len());
        for (k, col) in cols.iter().enumerate() {
            for j in 0..n_actions {
                w.set(j, k, col[j]);
            }
        }
        RingMachine::new(cols.len(), tau, n_actions, Some(w))
    };

    let mut t = 0usize;
    while t + window < demo.len() {
        let segment = &demo.samples[t..t + window];

        // Replay what we have accumulated so far; skip if it already fits.
        if acc_cols.len() >= 2 {
            let machine = acc_machine(&acc_cols)?;
            let e = replay_error(&machine, t, segment)?;
            if e < tol {
                skipped.push(t);
                t += window / 2;
                continue;
            }
        }

        let (w, _) = fit_window(segment, n0, tau)?;
        let mut t_bar = SoftTransition::ring(n0);
        for _ in 0..max_iter {
            let t_prime = t_bar.perturbed(rng);
            let Some(cycle) = t_prime.extract_cycle() else {
                continue; // invalid structure proposals are rejected outright
            };
            let (err, act) = eval_candidate(&cycle, &w, tau, n0, segment)?;
            if err <= tol {
                let advantage =
                    (tol - err) * ((t_bar.size() as f64 - t_prime.size() as f64).clamp(0.0, 1.0));
                if advantage > 0.0 {
                    for r in 0..n0 {
                        for c in 0..n0 {
                            if r == c {
                                continue;
                            }
                            let rel = act[r].abs();
                            let v = t_bar.t_bar.get(r, c)
                                + rel * (t_prime.t_bar.get(r, c) - t_bar.t_bar.get(r, c))
                                    * advantage;
                            t_bar.t_bar.set(r, c, v.clamp(0.0, 1.0));
                        }
                    }
                }
            }
        }

        // Binarize; an invalid relaxed result falls back to the full ring.
        let cycle = t_bar
            .extract_cycle()
            .unwrap_or_else(|| (0..n0).collect::<Vec<usize>>());
        let keep = cycle.len().div_ceil(2);
        for &orig in cycle.iter().take(keep) {
            acc_cols.push((0..n_actions).map(|j| w.get(j, orig)).collect());
        }
        t += window / 2;
    }

    if acc_cols.len() < 2 {
        return Err(CoreError::InvalidDemonstration(
            "demonstration too short to accumulate a network".into(),
        ));
    }
    let machine = acc_machine(&acc_cols)?;
    let (_, motors) = machine.roll(demo.len())?;
    let final_error = dtw_distance(&demo.samples, &motors)?;
    Ok(ProgramResult {
        topo: machine.topo,
        w_mot: machine.params.w_mot,
        tau,
        final_error,
        skipped_windows: skipped,
    })
}
