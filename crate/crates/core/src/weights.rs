//! Compilation of the transition matrix into the fixed (non-learned) weight
//! matrices of the selection, internal-state, and basis layers.

use serde::{Deserialize, Serialize};

use crate::boundary::{solve_c_params, BoundaryParams, CParams};
use crate::error::Result;
use crate::mat::Mat;
use crate::topology::Topology;

/// Analytically synthesized sparse weights. Nonzeros appear only where the
/// topology licenses them: a transition, a diagonal, or a feedback-dependence
/// flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedWeights {
    /// Selection gate: row i has a 1 in column k when neuron i is
    /// feedback-dependent and k is one of its transition predecessors.
    pub w_i_gate: Mat,
    /// Internal-state recurrence: predecessor excitation, self excitation on
    /// the diagonal, successor inhibition.
    pub w_cc: Mat,
    /// Basis trigger into feedback-independent neurons (predecessor basis).
    pub w_cb: Mat,
    /// Selection trigger into feedback-dependent neurons, one gain per row.
    pub w_ci: Vec<f64>,
    /// Internal-state bias, identical for every neuron.
    pub b_c: Vec<f64>,
    /// Basis shaping: tau on the diagonal, decay at the next and second-next
    /// key poses.
    pub w_bc: Mat,
    /// Basis leak, 1 - tau per neuron.
    pub w_bb: Vec<f64>,
    /// The solved ring-neuron weight tuple the matrices were built from.
    pub c_params: CParams,
}

/// Compile the fixed weights for `topo` from the boundary-condition solution.
pub fn build_fixed_weights(topo: &Topology, bp: &BoundaryParams) -> Result<FixedWeights> {
    let c_params = solve_c_params(bp)?;
    Ok(compile(topo, c_params))
}

/// Compile from an explicit weight tuple. Tests use this to pin the published
/// rounded constants instead of the solver output.
pub fn compile(topo: &Topology, p: CParams) -> FixedWeights {
    let n = topo.n_c();
    let mut w_i_gate = Mat::zeros(n, n);
    let mut w_cc = Mat::zeros(n, n);
    let mut w_cb = Mat::zeros(n, n);
    let mut w_ci = vec![0.0; n];
    let mut w_bc = Mat::zeros(n, n);
    let tau = topo.tau();

    for i in 0..n {
        w_cc.set(i, i, p.w_self);
        let dependent = topo.is_feedback_dependent(i);
        if dependent {
            w_ci[i] = p.w_trigger;
        }
        for k in 0..n {
            if topo.kappa(k, i) {
                // Transition k -> i: forward excitation, and either a basis
                // trigger (independent) or a gate entry (dependent).
                w_cc.set(i, k, p.w_prev);
                if dependent {
                    w_i_gate.set(i, k, 1.0);
                } else {
                    w_cb.set(i, k, p.w_trigger);
                }
            }
            if topo.kappa(i, k) {
                // Transition i -> k: backward inhibition from the successor.
                w_cc.set(i, k, p.w_next);
            }
        }

        // Basis shaping: second-next key poses first so that closer rules
        // take precedence if the graph ever folds back on itself.
        for &j in &topo.successors(i) {
            for &k in &topo.successors(j) {
                if k != i {
                    w_bc.set(i, k, -0.25 * tau[i]);
                }
            }
        }
        for &j in &topo.successors(i) {
            w_bc.set(i, j, -0.5 * tau[i]);
        }
        w_bc.set(i, i, tau[i]);
    }

    FixedWeights {
        w_i_gate,
        w_cc,
        w_cb,
        w_ci,
        b_c: vec![p.bias; n],
        w_bb: tau.iter().map(|t| 1.0 - t).collect(),
        c_params: p,
        w_bc,
    }
}
