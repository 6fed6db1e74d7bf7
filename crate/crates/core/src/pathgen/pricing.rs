//! One pricing round: a dual-weighted shortest path for every end-node combination
//! of every virtual link.

use std::collections::BTreeSet;

use serde::Serialize;

use super::dijkstra::dijkstra_capacitated;
use super::master::{AugPath, DualPrices};
use crate::model::{AugmentedNetwork, MetaLink, NodeId, SubstratePath};

/// Result of pricing one `(u, v)` end-node combination of a virtual link.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Combination {
    pub u: NodeId,
    pub v: NodeId,
    /// Shortest path and its full length `sigma_iu + sum link cost + tau_jv`,
    /// or `None` if no capacitated path exists.
    pub path: Option<(SubstratePath, f64)>,
}

/// Prices every `(u, v)` in `candidates(i) x candidates(j)` with `u != v` for one
/// virtual link. Links cost `gamma_l`, plus `1 / A_l` when `include_inverse_capacity`.
pub fn price_combinations(
    aug: &AugmentedNetwork,
    virtual_link: usize,
    prices: &DualPrices,
    include_inverse_capacity: bool,
) -> Vec<Combination> {
    let sn = aug.base;
    let vl = aug.vn.links()[virtual_link];
    let costs: Vec<f64> = (0..sn.link_count())
        .map(|l| {
            let a = sn.residual_bw(l);
            let inv = if include_inverse_capacity && a > 0 { 1.0 / a as f64 } else { 0.0 };
            prices.gamma[l] + inv
        })
        .collect();
    let mut out = Vec::new();
    for &u in aug.candidates(vl.i) {
        for &v in aug.candidates(vl.j) {
            if u == v {
                continue;
            }
            let ends = prices.sigma_of(MetaLink { virtual_node: vl.i, substrate_node: u })
                + prices.tau_of(MetaLink { virtual_node: vl.j, substrate_node: v });
            let path = dijkstra_capacitated(sn, u, v, vl.bw, &costs).map(|(p, c)| (p, c + ends));
            out.push(Combination { u, v, path });
        }
    }
    out
}

/// All priced paths not already in `pool`, in virtual-link then combination order.
pub fn price_paths(aug: &AugmentedNetwork, prices: &DualPrices, pool: &[AugPath]) -> Vec<AugPath> {
    let mut seen: BTreeSet<AugPath> = pool.iter().cloned().collect();
    let mut out = Vec::new();
    for k in 0..aug.vn.links().len() {
        for c in price_combinations(aug, k, prices, true) {
            if let Some((path, _)) = c.path {
                let p = AugPath { virtual_link: k, path };
                if seen.insert(p.clone()) {
                    out.push(p);
                }
            }
        }
    }
    out
}

/// Reduced cost of `p` in the flow formulation: `sum (1/A_l + gamma_l) + sigma +
/// tau - mu` over its links. Negative values mark columns that can improve the
/// relaxation.
pub fn reduced_cost(aug: &AugmentedNetwork, prices: &DualPrices, p: &AugPath) -> f64 {
    let sn = aug.base;
    let links: f64 = p.path.links().iter().map(|&l| 1.0 / sn.residual_bw(l) as f64 + prices.gamma[l]).sum();
    links + prices.sigma_of(p.entry(aug)) + prices.tau_of(p.exit(aug)) - prices.mu[p.virtual_link]
}
