//! Behavior-model export: the transition structure rendered as DOT text,
//! one cluster per subnetwork, with gated edges annotated by the feedback
//! channels that drive the transition.

use crate::error::{CoreError, Result};
use crate::params::LearnableParams;
use crate::topology::Topology;

/// Render the behavior graph. Output is byte-stable: nodes and edges are
/// emitted in index order and float labels use fixed precision.
pub fn export_behavior_graph(topo: &Topology, params: &LearnableParams) -> Result<String> {
    if topo.n_c() == 0 || topo.n_subnets() == 0 {
        return Err(CoreError::InvalidTopology("empty topology".into()));
    }
    let mut out = String::new();
    out.push_str("digraph behavior {\n");
    out.push_str("  rankdir=LR;\n");
    out.push_str("  node [shape=circle];\n");

    for (s, &(a, b)) in topo.subnets().iter().enumerate() {
        out.push_str(&format!("  subgraph cluster_{s} {{\n"));
        out.push_str(&format!("    label=\"sub{s}\";\n"));
        for i in a..b {
            out.push_str(&format!("    \"sub{s}/C{i}\";\n"));
        }
        out.push_str("  }\n");
    }

    for from in 0..topo.n_c() {
        for to in 0..topo.n_c() {
            if !topo.kappa(from, to) {
                continue;
            }
            let sf = topo.subnet_of(from);
            let st = topo.subnet_of(to);
            let mut line = format!("  \"sub{sf}/C{from}\" -> \"sub{st}/C{to}\"");
            if topo.is_feedback_dependent(to) {
                let channels = top_channels(params, to, 2);
                let label: Vec<String> = channels
                    .iter()
                    .map(|&(ch, w)| format!("fb{ch}:{w:.3}"))
                    .collect();
                line.push_str(&format!(" [label=\"{}\"]", label.join(", ")));
            }
            line.push_str(";\n");
            out.push_str(&line);
        }
    }
    out.push_str("}\n");
    Ok(out)
}

/// Top feedback channels of one classifier row by absolute weight, ties
/// broken by channel index.
fn top_channels(params: &LearnableParams, neuron: usize, count: usize) -> Vec<(usize, f64)> {
    let mut channels: Vec<(usize, f64)> = params
        .w_cls
        .row(neuron)
        .iter()
        .enumerate()
        .map(|(c, &w)| (c, w))
        .collect();
    channels.sort_by(|a, b| {
        b.1.abs()
            .partial_cmp(&a.1.abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    channels.truncate(count);
    channels
}
