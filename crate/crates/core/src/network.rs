//! Forward dynamics of the seven-layer controller.
//!
//! The recurrent layers (selection, internal state, basis) advance from the
//! previous timestep's activities; the memoryless layers (classification,
//! premotor, outputs) are linear reads of the same tick. `network_forward`
//! is a pure function of (state, feedback, weights).

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::mat::{dot, relu, sigmoid};
use crate::params::LearnableParams;
use crate::topology::Topology;
use crate::weights::FixedWeights;

/// One timestep of activities for every layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    /// Sensory feedback written into this tick.
    pub fb: Vec<f64>,
    /// Classification scores, sigmoid outputs in (0, 1).
    pub ip1: Vec<f64>,
    /// Gated selection signals, nonnegative.
    pub ip2: Vec<f64>,
    /// Discrete internal states, sigmoid outputs in (0, 1).
    pub c: Vec<f64>,
    /// Triangular bases, nonnegative.
    pub b: Vec<f64>,
    /// Premotor action patterns.
    pub pm: Vec<f64>,
    /// Motor commands.
    pub m: Vec<f64>,
    /// Value prediction.
    pub v: f64,
    /// Value-deviation band, at least eps_v.
    pub vdev: f64,
    /// Observation predictions.
    pub o: Vec<f64>,
    /// Observation-deviation bands, each at least eps_o.
    pub odev: Vec<f64>,
}

impl NetworkState {
    /// Startup state: the first neuron of subnetwork 0 is seeded active so
    /// propagation has somewhere to begin; everything else rests.
    pub fn initial(topo: &Topology, params: &LearnableParams) -> Self {
        Self::initial_seeded(topo, params, topo.subnets()[0].0)
    }

    /// Startup state with an explicit seed neuron. Fixtures use this to park
    /// activity in a chosen subnetwork.
    pub fn initial_seeded(topo: &Topology, params: &LearnableParams, seed: usize) -> Self {
        let n = topo.n_c();
        let mut c = vec![0.01; n];
        c[seed] = 0.95;
        NetworkState {
            fb: vec![0.0; topo.n_fb],
            ip1: vec![0.5; n],
            ip2: vec![0.0; n],
            c,
            b: vec![0.0; n],
            pm: vec![0.0; n],
            m: vec![0.0; topo.n_actions],
            v: 0.0,
            vdev: params.eps_v,
            o: vec![0.0; topo.n_fb],
            odev: vec![params.eps_o; topo.n_fb],
        }
    }

    /// Extend the state for a grown topology: new neurons rest, new bases and
    /// selection signals are zero. Existing activities are untouched.
    pub fn extended(&self, topo: &Topology) -> Self {
        let n = topo.n_c();
        let grow = |v: &Vec<f64>, fill: f64| {
            let mut out = v.clone();
            out.resize(n, fill);
            out
        };
        NetworkState {
            fb: self.fb.clone(),
            ip1: grow(&self.ip1, 0.5),
            ip2: grow(&self.ip2, 0.0),
            c: grow(&self.c, 0.01),
            b: grow(&self.b, 0.0),
            pm: grow(&self.pm, 0.0),
            m: self.m.clone(),
            v: self.v,
            vdev: self.vdev,
            o: self.o.clone(),
            odev: self.odev.clone(),
        }
    }
}

/// Classification scores from raw feedback.
pub fn ip1_step(fb: &[f64], params: &LearnableParams) -> Result<Vec<f64>> {
    if fb.len() != params.w_cls.cols() {
        return Err(CoreError::DimensionMismatch(format!(
            "feedback has {} channels, classifier expects {}",
            fb.len(),
            params.w_cls.cols()
        )));
    }
    if fb.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::DimensionMismatch(
            "feedback contains non-finite values".into(),
        ));
    }
    let z = params.w_cls.matvec(fb);
    Ok(z.iter()
        .zip(&params.b_cls)
        .map(|(zi, bi)| sigmoid(zi + bi))
        .collect())
}

/// Gated selection update. Rows without gate entries stay at zero because of
/// the -1 bias.
pub fn ip2_step(
    ip2_prev: &[f64],
    ip1: &[f64],
    c: &[f64],
    fixed: &FixedWeights,
    tau: &[f64],
) -> Vec<f64> {
    let gate = fixed.w_i_gate.matvec(c);
    (0..ip2_prev.len())
        .map(|i| relu(gate[i] + tau[i] * ip1[i] + (1.0 - tau[i]) * ip2_prev[i] - 1.0))
        .collect()
}

/// Internal-state update: excitation from predecessors, self-sustain,
/// inhibition from successors, and the per-type trigger.
pub fn cpg_step(c: &[f64], b: &[f64], ip2: &[f64], fixed: &FixedWeights) -> Vec<f64> {
    let from_c = fixed.w_cc.matvec(c);
    let from_b = fixed.w_cb.matvec(b);
    (0..c.len())
        .map(|i| sigmoid(from_c[i] + from_b[i] + fixed.w_ci[i] * ip2[i] + fixed.b_c[i]))
        .collect()
}

/// Basis low-pass update with triangular shaping.
pub fn basis_step(b: &[f64], c: &[f64], fixed: &FixedWeights) -> Vec<f64> {
    let from_c = fixed.w_bc.matvec(c);
    (0..b.len())
        .map(|i| relu(from_c[i] + fixed.w_bb[i] * b[i]))
        .collect()
}

/// Premotor patterns from bases.
pub fn premotor_step(b: &[f64], params: &LearnableParams) -> Vec<f64> {
    params.w_sup.matvec(b)
}

/// Motor, value, and observation outputs of one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct Outputs {
    pub m: Vec<f64>,
    pub v: f64,
    pub vdev: f64,
    pub o: Vec<f64>,
    pub odev: Vec<f64>,
}

/// Linear output reads with deviation floors.
pub fn output_step(pm: &[f64], b: &[f64], params: &LearnableParams) -> Outputs {
    let o = params.w_obs.matvec(b);
    let odev = params
        .w_obsdev
        .matvec(b)
        .into_iter()
        .map(|x| x.max(params.eps_o))
        .collect();
    Outputs {
        m: params.w_mot.matvec(pm),
        v: dot(&params.w_val, b),
        vdev: dot(&params.w_valdev, b).max(params.eps_v),
        o,
        odev,
    }
}

/// Advance the whole controller one tick. `fb` is the feedback observed at
/// the new tick; recurrent layers read the previous state.
pub fn network_forward(
    state: &NetworkState,
    fb: &[f64],
    topo: &Topology,
    fixed: &FixedWeights,
    params: &LearnableParams,
) -> Result<NetworkState> {
    let n = topo.n_c();
    if state.c.len() != n || state.b.len() != n || state.ip2.len() != n {
        return Err(CoreError::DimensionMismatch(format!(
            "state sized for {} neurons, topology has {n}",
            state.c.len()
        )));
    }
    let ip1 = ip1_step(fb, params)?;
    let ip2 = ip2_step(&state.ip2, &state.ip1, &state.c, fixed, topo.tau());
    let c = cpg_step(&state.c, &state.b, &state.ip2, fixed);
    let b = basis_step(&state.b, &state.c, fixed);
    let pm = premotor_step(&b, params);
    let out = output_step(&pm, &b, params);
    Ok(NetworkState {
        fb: fb.to_vec(),
        ip1,
        ip2,
        c,
        b,
        pm,
        m: out.m,
        v: out.v,
        vdev: out.vdev,
        o: out.o,
        odev: out.odev,
    })
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::CParams;
    use crate::topology::Topology;
    use crate::weights::compile;

    fn rounded() -> CParams {
        CParams {
            w_prev: 7.0,
            w_self: 20.0,
            w_next: -26.0,
            w_trigger: 7.0,
            bias: -13.0,
        }
    }

    #[test]
    fn ip1_zero_weights_give_half() {
        let topo = Topology::single_ring(4, 0.08, 3, 2).unwrap();
        let params = LearnableParams::new(&topo, 0.05);
        let out = ip1_step(&[0.3, -1.0, 2.0], &params).unwrap();
        assert!(out.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn ip1_single_row_sigmoid() {
        let topo = Topology::single_ring(4, 0.08, 3, 2).unwrap();
        let mut params = LearnableParams::new(&topo, 0.05);
        params.w_cls.set(0, 0, 4.0);
        params.b_cls[0] = -2.0;
        let out = ip1_step(&[1.0, 0.0, 0.0], &params).unwrap();
        assert!((out[0] - sigmoid(2.0)).abs() < 1e-12);
        assert!((out[0] - 0.8808).abs() < 1e-4);
    }

    #[test]
    fn ip1_dimension_mismatch() {
        let topo = Topology::single_ring(4, 0.08, 3, 2).unwrap();
        let params = LearnableParams::new(&topo, 0.05);
        assert!(ip1_step(&[1.0, 2.0], &params).is_err());
    }

    #[test]
    fn ip2_gate_open_and_closed() {
        let base = Topology::single_ring(4, 0.08, 3, 2).unwrap();
        let (topo, _) = base.with_grown_subnet(2, 3, 0.08).unwrap();
        let fixed = compile(&topo, rounded());
        let n = topo.n_c();
        // Neuron 4 is gated by predecessors 2 (cross) and 7 (ring).
        let mut c = vec![0.0; n];
        c[2] = 1.0;
        let mut ip1 = vec![0.0; n];
        ip1[4] = 1.0;
        let open = ip2_step(&vec![0.0; n], &ip1, &c, &fixed, topo.tau());
        assert!((open[4] - 0.08).abs() < 1e-12);
        let closed = ip2_step(&vec![0.0; n], &ip1, &vec![0.0; n], &fixed, topo.tau());
        assert_eq!(closed[4], 0.0);
        // All-zero input: ReLU(-1) everywhere.
        let zeros = ip2_step(&vec![0.0; n], &vec![0.0; n], &vec![0.0; n], &fixed, topo.tau());
        assert!(zeros.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cpg_self_sustains_and_inhibits() {
        let topo = Topology::single_ring(4, 0.08, 3, 2).unwrap();
        let fixed = compile(&topo, rounded());
        // Isolated active neuron self-sustains.
        let mut c = vec![0.0; 4];
        c[1] = 0.95;
        let next = cpg_step(&c, &[0.0; 4], &[0.0; 4], &fixed);
        assert!((next[1] - sigmoid(6.0)).abs() < 1e-12);
        assert!(next[1] > 0.99);
        // Active successor extinguishes the neuron.
        c[2] = 0.95;
        let next = cpg_step(&c, &[0.0; 4], &[0.0; 4], &fixed);
        assert!((next[1] - sigmoid(20.0 * 0.95 - 26.0 * 0.95 - 13.0)).abs() < 1e-12);
        assert!(next[1] < 1e-6);
    }

    #[test]
    fn cpg_propagated_excitation() {
        let topo = Topology::single_ring(4, 0.08, 3, 2).unwrap();
        let fixed = compile(&topo, rounded());
        // Predecessor 0 active with its basis high; neuron 1 nearly silent.
        let mut c = vec![0.0; 4];
        c[0] = 0.95;
        c[1] = 0.01;
        let mut b = vec![0.0; 4];
        b[0] = 0.95;
        let next = cpg_step(&c, &b, &[0.0; 4], &fixed);
        let pre: f64 = 7.0 * 0.95 + 7.0 * 0.95 + 20.0 * 0.01 - 13.0;
        assert!((pre - 0.5).abs() < 1e-12);
        assert!((next[1] - sigmoid(0.5)).abs() < 1e-12);
    }

    #[test]
    fn basis_one_step_and_geometric_rise() {
        let topo = Topology::single_ring(4, 0.08, 3, 2).unwrap();
        let fixed = compile(&topo, rounded());
        let zero = basis_step(&[0.0; 4], &[0.0; 4], &fixed);
        assert!(zero.iter().all(|&v| v == 0.0));

        let mut c = vec![0.0; 4];
        c[0] = 1.0;
        let mut b = vec![0.0; 4];
        b = basis_step(&b, &c, &fixed);
        assert!((b[0] - 0.08).abs() < 1e-15);
        for _ in 1..20 {
            b = basis_step(&b, &c, &fixed);
        }
        let expect = 1.0 - 0.92f64.powi(20);
        assert!((b[0] - expect).abs() < 1e-12, "{} vs {expect}", b[0]);
    }

    #[test]
    fn premotor_identity_and_cross_weight() {
        let topo = Topology::disconnected_rings(2, 0.08, 3, 2).unwrap();
        let mut params = LearnableParams::new(&topo, 0.05);
        let mut b = vec![0.0; 8];
        b[2] = 1.0;
        let pm = premotor_step(&b, &params);
        assert_eq!(pm[2], 1.0);
        assert!(pm.iter().enumerate().all(|(i, &v)| v == f64::from(i == 2)));

        params.w_sup.set(0, 4, 0.2);
        let mut b = vec![0.0; 8];
        b[4] = 1.0;
        let pm = premotor_step(&b, &params);
        assert!((pm[0] - 0.2).abs() < 1e-15);
        assert_eq!(pm[4], 1.0);
    }

    #[test]
    fn output_floors_and_mapping() {
        let topo = Topology::single_ring(4, 0.08, 3, 2).unwrap();
        let mut params = LearnableParams::new(&topo, 0.05);
        let out = output_step(&[0.0; 4], &[0.0; 4], &params);
        assert_eq!(out.v, 0.0);
        assert_eq!(out.vdev, 0.02);
        assert!(out.odev.iter().all(|&v| v == 0.02));
        assert!(out.m.iter().all(|&v| v == 0.0));

        params.w_mot.set(0, 3, -0.8);
        let mut pm = vec![0.0; 4];
        pm[3] = 1.0;
        let out = output_step(&pm, &[0.0; 4], &params);
        assert!((out.m[0] + 0.8).abs() < 1e-15);

        let b = [0.4, 0.3, 0.2, 0.0];
        let out = output_step(&[0.0; 4], &b, &params);
        assert!((out.vdev - 0.9).abs() < 1e-12); // all-ones deviation weights
    }

    #[test]
    fn forward_zero_motor_stays_zero() {
        let topo = Topology::single_ring(4, 0.08, 3, 2).unwrap();
        let params = LearnableParams::new(&topo, 0.05);
        let fixed = compile(&topo, rounded());
        let mut state = NetworkState::initial(&topo, &params);
        for _ in 0..200 {
            state = network_forward(&state, &[0.1, 0.2, 0.3], &topo, &fixed, &params).unwrap();
            assert!(state.m.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn forward_is_pure() {
        let topo = Topology::single_ring(4, 0.08, 3, 2).unwrap();
        let params = LearnableParams::new(&topo, 0.05);
        let fixed = compile(&topo, rounded());
        let state = NetworkState::initial(&topo, &params);
        let a = network_forward(&state, &[0.5, 0.0, 0.1], &topo, &fixed, &params).unwrap();
        let b = network_forward(&state, &[0.5, 0.0, 0.1], &topo, &fixed, &params).unwrap();
        assert_eq!(a, b);
    }
}
