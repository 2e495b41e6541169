//! Structure growth: append a fresh four-neuron ring, wire it to the
//! currently active subnetwork, seed it with the active skill's learned
//! weights, and recompile the fixed weights.

use serde::{Deserialize, Serialize};

use crate::boundary::BoundaryParams;
use crate::error::Result;
use crate::params::{fill_cross_entries, LearnableParams};
use crate::topology::{Topology, SUBNET_SIZE};
use crate::weights::{build_fixed_weights, FixedWeights};

/// Which subnetwork donates its learned weights to a new ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransferStyle {
    /// Copy from the subnetwork that was active at detection time.
    Direct,
    /// Copy from subnetwork 0 regardless of activity (ablation baseline).
    FromFirst,
}

/// Outcome of one growth step.
#[derive(Debug, Clone)]
pub struct Growth {
    pub topo: Topology,
    pub fixed: FixedWeights,
    pub params: LearnableParams,
    /// Index range of the new subnetwork.
    pub new_range: (usize, usize),
}

/// Append a subnetwork entered from `active_sub` at `phase_at_detection`.
///
/// The new ring receives the donor's motor columns, value weights, and
/// observation template (aligned by ring phase); its deviation weights start
/// at one so the prediction bands open to the maximum, its classifier rows
/// and premotor cross terms start at zero, and its exploration rates start at
/// `sigma_max`. Everything previously learned keeps its exact bits.
pub fn grow_subnetwork(
    topo: &Topology,
    params: &LearnableParams,
    bp: &BoundaryParams,
    active_sub: usize,
    phase_at_detection: usize,
    tau: f64,
    sigma_max: f64,
    style: TransferStyle,
) -> Result<Growth> {
    let from_neuron = topo.neuron_at_phase(active_sub, phase_at_detection);
    let back_into = topo.ring_successor(from_neuron);
    let (new_topo, new_range) = topo.with_grown_subnet(from_neuron, back_into, tau)?;
    let fixed = build_fixed_weights(&new_topo, bp)?;

    let donor = match style {
        TransferStyle::Direct => active_sub,
        TransferStyle::FromFirst => 0,
    };
    let (donor_start, donor_end) = topo.subnets()[donor];
    debug_assert_eq!(donor_end - donor_start, SUBNET_SIZE);

    let old_n = topo.n_c();
    let new_n = new_topo.n_c();
    let n_fb = topo.n_fb;
    let n_actions = topo.n_actions;

    let mut out = LearnableParams {
        w_cls: params.w_cls.resized(new_n, n_fb, 0.0),
        b_cls: {
            let mut b = params.b_cls.clone();
            b.resize(new_n, 0.0);
            b
        },
        w_sup: params.w_sup.resized(new_n, new_n, 0.0),
        w_mot: params.w_mot.resized(n_actions, new_n, 0.0),
        w_val: {
            let mut v = params.w_val.clone();
            v.resize(new_n, 0.0);
            v
        },
        w_valdev: {
            let mut v = params.w_valdev.clone();
            v.resize(new_n, 1.0);
            v
        },
        w_obs: params.w_obs.resized(n_fb, new_n, 0.0),
        w_obsdev: params.w_obsdev.resized(n_fb, new_n, 1.0),
        sigma_mot: params.sigma_mot.resized(n_actions, new_n, sigma_max),
        sigma_sup: params.sigma_sup.resized(new_n, new_n, 0.0),
        eps_v: params.eps_v,
        eps_o: params.eps_o,
    };

    // Resizing a square matrix leaves the new rows/cols at the fill value;
    // restore the premotor diagonal and open exploration on the new cross
    // pairs (both directions).
    for i in old_n..new_n {
        out.w_sup.set(i, i, 1.0);
    }
    let mut fresh_sigma = crate::mat::Mat::zeros(new_n, new_n);
    fill_cross_entries(&mut fresh_sigma, &new_topo, sigma_max);
    for i in 0..new_n {
        for k in 0..new_n {
            if (i >= old_n || k >= old_n) && fresh_sigma.get(i, k) != 0.0 {
                out.sigma_sup.set(i, k, sigma_max);
            }
        }
    }

    // Direct knowledge transfer: copy the donor's skill onto the new indices,
    // phase-aligned. Deviation weights are deliberately not copied.
    let (new_start, _) = new_range;
    for offset in 0..SUBNET_SIZE {
        let src = topo.neuron_at_phase(donor, offset);
        let dst = new_start + offset;
        for j in 0..n_actions {
            out.w_mot.set(j, dst, params.w_mot.get(j, src));
        }
        out.w_val[dst] = params.w_val[src];
        for i in 0..n_fb {
            out.w_obs.set(i, dst, params.w_obs.get(i, src));
        }
    }

    Ok(Growth {
        topo: new_topo,
        fixed,
        params: out,
        new_range,
    })
}
