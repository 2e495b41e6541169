//! Growable ring-network locomotion controller with dual-layer online learning.
//!
//! The controller is a sparse recurrent network organized as columns of
//! four-neuron rings. Each ring encodes one skill as a cycle of discrete
//! internal states; triangular basis signals derived from those states carry
//! the learned motor mapping. New rings are grown online when both the value
//! prediction and the observation prediction break their learned bands, and
//! a masked policy-gradient rule guarantees that inactive rings are never
//! rewritten.

pub mod boundary;
pub mod demo;
pub mod envsim;
pub mod error;
pub mod graphviz;
pub mod growth;
pub mod learning;
pub mod linalg;
pub mod mat;
pub mod network;
pub mod novelty;
pub mod params;
pub mod topology;
pub mod weights;

pub use boundary::{solve_c_params, BoundaryParams, CParams};
pub use error::CoreError;
pub use mat::Mat;
pub use network::{
    basis_step, cpg_step, ip1_step, ip2_step, network_forward, output_step, premotor_step,
    NetworkState, Outputs,
};
pub use params::LearnableParams;
pub use topology::Topology;
pub use weights::{build_fixed_weights, FixedWeights};
