use serde::{Deserialize, Serialize};

use crate::mat::Mat;
use crate::topology::Topology;

/// Floor on the value-deviation output.
pub const EPS_V: f64 = 0.02;
/// Floor on each observation-deviation output.
pub const EPS_O: f64 = 0.02;

/// Every trained weight of the controller plus the per-parameter exploration
/// standard deviations.
///
/// Initialization conventions: classifier, motor, value, and observation
/// weights start at zero (no behavior selection, default standing posture,
/// zero predictions); deviation weights start at one so a fresh skill opens
/// its prediction bands to the maximum; the premotor diagonal is pinned to 1
/// and only cross-subnetwork entries ever learn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnableParams {
    /// Classifier: feedback -> per-neuron selection score, n_c x n_fb.
    pub w_cls: Mat,
    pub b_cls: Vec<f64>,
    /// Premotor mixing, n_c x n_c. Diagonal fixed at 1.
    pub w_sup: Mat,
    /// Motor mapping, n_actions x n_c.
    pub w_mot: Mat,
    /// Value prediction weights per basis.
    pub w_val: Vec<f64>,
    /// Value-deviation weights per basis.
    pub w_valdev: Vec<f64>,
    /// Observation prediction, n_fb x n_c.
    pub w_obs: Mat,
    /// Observation deviation, n_fb x n_c.
    pub w_obsdev: Mat,
    /// Exploration std per motor weight, n_actions x n_c.
    pub sigma_mot: Mat,
    /// Exploration std per premotor cross weight, n_c x n_c.
    pub sigma_sup: Mat,
    pub eps_v: f64,
    pub eps_o: f64,
}

impl LearnableParams {
    pub fn new(topo: &Topology, sigma_init: f64) -> Self {
        let n = topo.n_c();
        let mut sigma_sup = Mat::zeros(n, n);
        fill_cross_entries(&mut sigma_sup, topo, sigma_init);
        LearnableParams {
            w_cls: Mat::zeros(n, topo.n_fb),
            b_cls: vec![0.0; n],
            w_sup: Mat::identity(n),
            w_mot: Mat::zeros(topo.n_actions, n),
            w_val: vec![0.0; n],
            w_valdev: vec![1.0; n],
            w_obs: Mat::zeros(topo.n_fb, n),
            w_obsdev: Mat::from_rows(vec![vec![1.0; n]; topo.n_fb]),
            sigma_mot: {
                let mut m = Mat::zeros(topo.n_actions, n);
                for r in 0..topo.n_actions {
                    for c in 0..n {
                        m.set(r, c, sigma_init);
                    }
                }
                m
            },
            sigma_sup,
            eps_v: EPS_V,
            eps_o: EPS_O,
        }
    }

    pub fn n_c(&self) -> usize {
        self.w_sup.rows()
    }

    /// Clamp every exploration std into [min, max].
    pub fn clamp_sigma(&mut self, min: f64, max: f64) {
        let (rows, cols) = (self.sigma_mot.rows(), self.sigma_mot.cols());
        for r in 0..rows {
            for c in 0..cols {
                let v = self.sigma_mot.get(r, c).clamp(min, max);
                self.sigma_mot.set(r, c, v);
            }
        }
        let n = self.sigma_sup.rows();
        for r in 0..n {
            for c in 0..n {
                if self.sigma_sup.get(r, c) != 0.0 {
                    let v = self.sigma_sup.get(r, c).clamp(min, max);
                    self.sigma_sup.set(r, c, v);
                }
            }
        }
    }

    /// Indices (i, k) of premotor entries that are learnable: off-diagonal
    /// pairs whose premotor neuron and basis live in different subnetworks.
    pub fn cross_entries(topo: &Topology) -> Vec<(usize, usize)> {
        let n = topo.n_c();
        let mut out = Vec::new();
        for i in 0..n {
            for k in 0..n {
                if i != k && topo.subnet_of(i) != topo.subnet_of(k) {
                    out.push((i, k));
                }
            }
        }
        out
    }
}

/// Write `value` into every learnable cross entry of `m`, leaving diagonal
/// and within-subnetwork entries at zero.
pub fn fill_cross_entries(m: &mut Mat, topo: &Topology, value: f64) {
    for (i, k) in LearnableParams::cross_entries(topo) {
        m.set(i, k, value);
    }
}
