//! Demand- and capacity-weighted averages that bias the initial node mapping.

use serde::Serialize;
use thiserror::Error;

use crate::model::{NodeId, SubstrateNetwork, VnRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("node {0} has no incident links")]
pub struct IsolatedNode(pub usize);

/// `sum d^2 / sum d`: each value weighted by its share of the total.
pub fn weighted_average(values: impl IntoIterator<Item = u32>) -> Option<f64> {
    let (mut sum, mut squares) = (0u64, 0u64);
    let mut any = false;
    for v in values {
        any = true;
        sum += v as u64;
        squares += v as u64 * v as u64;
    }
    (any && sum > 0).then(|| squares as f64 / sum as f64)
}

/// `W_i` over the demands of the links incident to virtual node `i`.
pub fn weight_virtual(i: usize, vn: &VnRequest) -> Result<f64, IsolatedNode> {
    weighted_average(vn.incident_links(i).iter().map(|&k| vn.links()[k].bw)).ok_or(IsolatedNode(i))
}

/// `W_u` over the residual bandwidths of the links incident to substrate node `u`.
/// Zero when every incident link is saturated.
pub fn weight_substrate(u: NodeId, sn: &SubstrateNetwork) -> Result<f64, IsolatedNode> {
    let adj = sn.neighbors(u);
    if adj.is_empty() {
        return Err(IsolatedNode(u));
    }
    Ok(weighted_average(adj.iter().map(|&(_, l)| sn.residual_bw(l))).unwrap_or(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeWeights {
    pub w_virtual: Vec<f64>,
    pub w_substrate: Vec<f64>,
}

impl NodeWeights {
    /// Weights for every node. A virtual node without links gets weight 1, and a
    /// substrate node without links weight 0, which keeps it out of the node mapping.
    pub fn compute(sn: &SubstrateNetwork, vn: &VnRequest) -> Self {
        NodeWeights {
            w_virtual: (0..vn.nodes().len()).map(|i| weight_virtual(i, vn).unwrap_or(1.0)).collect(),
            w_substrate: (0..sn.node_count()).map(|u| weight_substrate(u, sn).unwrap_or(0.0)).collect(),
        }
    }
}
