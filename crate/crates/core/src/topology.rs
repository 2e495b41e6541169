use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Neurons per subnetwork in the locomotion configuration: two swing and two
/// stance key poses.
pub const SUBNET_SIZE: usize = 4;

/// Network structure: the boolean transition matrix over the internal-state
/// neurons plus the bookkeeping derived from it. This is the single source of
/// truth for which connections exist; all fixed weights are compiled from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    /// Number of internal-state neurons.
    n_c: usize,
    /// kappa[r][c] = true means a transition from neuron r to neuron c.
    kappa: Vec<Vec<bool>>,
    /// Contiguous index ranges, one per subnetwork, in order.
    subnets: Vec<(usize, usize)>,
    /// Per-neuron transition speed in (0, 1).
    tau: Vec<f64>,
    /// Feedback channel count.
    pub n_fb: usize,
    /// Motor output count.
    pub n_actions: usize,
}

impl Topology {
    /// Build and validate a topology from an explicit transition matrix.
    pub fn new(
        kappa: Vec<Vec<bool>>,
        subnets: Vec<(usize, usize)>,
        tau: Vec<f64>,
        n_fb: usize,
        n_actions: usize,
    ) -> Result<Self> {
        let topo = Topology {
            n_c: kappa.len(),
            kappa,
            subnets,
            tau,
            n_fb,
            n_actions,
        };
        topo.validate()?;
        Ok(topo)
    }

    /// Single ring of `n` neurons (0 -> 1 -> ... -> n-1 -> 0), one subnetwork.
    pub fn single_ring(n: usize, tau: f64, n_fb: usize, n_actions: usize) -> Result<Self> {
        let mut kappa = vec![vec![false; n]; n];
        for i in 0..n {
            kappa[i][(i + 1) % n] = true;
        }
        Topology::new(kappa, vec![(0, n)], vec![tau; n], n_fb, n_actions)
    }

    /// `count` disconnected rings of SUBNET_SIZE neurons each. Used by
    /// fixtures that need isolated skills without transition wiring.
    pub fn disconnected_rings(
        count: usize,
        tau: f64,
        n_fb: usize,
        n_actions: usize,
    ) -> Result<Self> {
        let n = count * SUBNET_SIZE;
        let mut kappa = vec![vec![false; n]; n];
        let mut subnets = Vec::with_capacity(count);
        for s in 0..count {
            let base = s * SUBNET_SIZE;
            for i in 0..SUBNET_SIZE {
                kappa[base + i][base + (i + 1) % SUBNET_SIZE] = true;
            }
            subnets.push((base, base + SUBNET_SIZE));
        }
        Topology::new(kappa, subnets, vec![tau; n], n_fb, n_actions)
    }

    pub fn n_c(&self) -> usize {
        self.n_c
    }

    pub fn kappa(&self, from: usize, to: usize) -> bool {
        self.kappa[from][to]
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    pub fn subnets(&self) -> &[(usize, usize)] {
        &self.subnets
    }

    pub fn n_subnets(&self) -> usize {
        self.subnets.len()
    }

    /// Subnetwork index owning neuron `i`.
    pub fn subnet_of(&self, i: usize) -> usize {
        self.subnets
            .iter()
            .position(|&(a, b)| i >= a && i < b)
            .expect("neuron outside every subnetwork")
    }

    pub fn in_degree(&self, i: usize) -> usize {
        (0..self.n_c).filter(|&r| self.kappa[r][i]).count()
    }

    /// A neuron with a single incoming transition propagates unconditionally;
    /// two or more incoming transitions make it feedback-dependent (its
    /// activation additionally requires a selection signal).
    pub fn is_feedback_dependent(&self, i: usize) -> bool {
        self.in_degree(i) >= 2
    }

    pub fn predecessors(&self, i: usize) -> Vec<usize> {
        (0..self.n_c).filter(|&r| self.kappa[r][i]).collect()
    }

    pub fn successors(&self, i: usize) -> Vec<usize> {
        (0..self.n_c).filter(|&c| self.kappa[i][c]).collect()
    }

    /// Ring successor of `i` inside its own subnetwork.
    pub fn ring_successor(&self, i: usize) -> usize {
        let s = self.subnet_of(i);
        let (a, b) = self.subnets[s];
        (a..b)
            .find(|&c| self.kappa[i][c])
            .expect("ring neuron without in-subnet successor")
    }

    /// Zero-based ring position of neuron `i` within its subnetwork, counted
    /// along the cycle from the subnetwork's first index.
    pub fn ring_position(&self, i: usize) -> usize {
        let s = self.subnet_of(i);
        let (a, b) = self.subnets[s];
        let mut cur = a;
        for pos in 0..(b - a) {
            if cur == i {
                return pos;
            }
            cur = self.ring_successor(cur);
        }
        unreachable!("cycle does not visit neuron {i}");
    }

    /// Neuron at ring position `pos` (mod ring size) of subnetwork `s`.
    pub fn neuron_at_phase(&self, s: usize, pos: usize) -> usize {
        let (a, b) = self.subnets[s];
        let mut cur = a;
        for _ in 0..(pos % (b - a)) {
            cur = self.ring_successor(cur);
        }
        cur
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let n = self.n_c;
        if self.kappa.len() != n || self.kappa.iter().any(|row| row.len() != n) {
            return Err(CoreError::InvalidTopology("kappa is not square".into()));
        }
        if n == 0 {
            return Err(CoreError::InvalidTopology("empty topology".into()));
        }
        if self.tau.len() != n {
            return Err(CoreError::InvalidTopology("tau length mismatch".into()));
        }
        if self.tau.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
            return Err(CoreError::InvalidTopology(
                "tau entries must lie in (0, 1)".into(),
            ));
        }
        for i in 0..n {
            if self.kappa[i][i] {
                return Err(CoreError::InvalidTopology(format!(
                    "kappa has a diagonal entry at {i}"
                )));
            }
        }
        // Subnetworks partition 0..n_c into contiguous ranges.
        let mut cursor = 0;
        for &(a, b) in &self.subnets {
            if a != cursor || b <= a {
                return Err(CoreError::InvalidTopology(
                    "subnetworks must be contiguous, ordered, and nonempty".into(),
                ));
            }
            if b - a < 2 {
                return Err(CoreError::InvalidTopology(
                    "a subnetwork needs at least 2 neurons to form a cycle".into(),
                ));
            }
            cursor = b;
        }
        if cursor != n {
            return Err(CoreError::InvalidTopology(
                "subnetworks do not cover every neuron".into(),
            ));
        }
        // Within each subnetwork the internal transitions form one directed
        // cycle: every member has exactly one in-subnet successor and one
        // in-subnet predecessor, and the cycle visits all members.
        for &(a, b) in &self.subnets {
            for i in a..b {
                let succ: Vec<usize> = (a..b).filter(|&c| self.kappa[i][c]).collect();
                let pred: Vec<usize> = (a..b).filter(|&r| self.kappa[r][i]).collect();
                if succ.len() != 1 || pred.len() != 1 {
                    return Err(CoreError::InvalidTopology(format!(
                        "neuron {i} has {} in-subnet successors and {} predecessors",
                        succ.len(),
                        pred.len()
                    )));
                }
            }
            let mut seen = vec![false; b - a];
            let mut cur = a;
            for _ in 0..(b - a) {
                if seen[cur - a] {
                    return Err(CoreError::InvalidTopology(format!(
                        "subnetwork {a}..{b} splits into multiple cycles"
                    )));
                }
                seen[cur - a] = true;
                cur = (a..b).find(|&c| self.kappa[cur][c]).unwrap();
            }
            if cur != a || seen.iter().any(|&s| !s) {
                return Err(CoreError::InvalidTopology(format!(
                    "subnetwork {a}..{b} is not a single cycle"
                )));
            }
        }
        Ok(())
    }

    /// Extend with a fresh ring of SUBNET_SIZE neurons plus the two gated
    /// cross transitions used by growth. Returns the new topology and the
    /// index range of the added subnetwork.
    pub fn with_grown_subnet(
        &self,
        from_neuron: usize,
        back_into: usize,
        tau: f64,
    ) -> Result<(Topology, (usize, usize))> {
        let old_n = self.n_c;
        let new_n = old_n + SUBNET_SIZE;
        let mut kappa = vec![vec![false; new_n]; new_n];
        for r in 0..old_n {
            for c in 0..old_n {
                kappa[r][c] = self.kappa[r][c];
            }
        }
        for i in 0..SUBNET_SIZE {
            kappa[old_n + i][old_n + (i + 1) % SUBNET_SIZE] = true;
        }
        // Entry into the new ring from the detection-phase neuron, and a
        // return edge from the opposite phase of the new ring.
        kappa[from_neuron][old_n] = true;
        kappa[old_n + SUBNET_SIZE / 2][back_into] = true;

        let mut subnets = self.subnets.clone();
        subnets.push((old_n, new_n));
        let mut taus = self.tau.clone();
        taus.extend(std::iter::repeat(tau).take(SUBNET_SIZE));
        let topo = Topology::new(kappa, subnets, taus, self.n_fb, self.n_actions)?;
        Ok((topo, (old_n, new_n)))
    }
}
