//! Shortest paths restricted to links that can carry a given demand.

use std::cmp::Ordering;

use crate::model::{LinkId, NodeId, SubstrateNetwork, SubstratePath};

/// Costs closer than this (relative) count as equal, so ties fall through to hop
/// count and then to the lexicographic node sequence.
const COST_TIE: f64 = 1e-12;

#[derive(Debug, Clone)]
struct Label {
    cost: f64,
    nodes: Vec<NodeId>,
}

fn compare(a: &Label, b: &Label) -> Ordering {
    let tol = COST_TIE * a.cost.abs().max(b.cost.abs()).max(1.0);
    if a.cost < b.cost - tol {
        Ordering::Less
    } else if a.cost > b.cost + tol {
        Ordering::Greater
    } else {
        a.nodes.len().cmp(&b.nodes.len()).then_with(|| a.nodes.cmp(&b.nodes))
    }
}

/// Minimum-cost simple path from `s` to `t` over links whose residual is at least
/// `demand`, with `link_cost[l]` per link. Ties prefer fewer hops, then the
/// lexicographically smallest node sequence. Returns the path and its cost.
pub fn dijkstra_capacitated(
    sn: &SubstrateNetwork,
    s: NodeId,
    t: NodeId,
    demand: u32,
    link_cost: &[f64],
) -> Option<(SubstratePath, f64)> {
    dijkstra_with_residuals(sn, sn.residual_bw_table(), s, t, demand, link_cost)
}

/// As [`dijkstra_capacitated`], filtering against `residual` instead of the
/// network's own residual table.
pub fn dijkstra_with_residuals(
    sn: &SubstrateNetwork,
    residual: &[u32],
    s: NodeId,
    t: NodeId,
    demand: u32,
    link_cost: &[f64],
) -> Option<(SubstratePath, f64)> {
    assert_ne!(s, t, "source and target must differ");
    let n = sn.node_count();
    let mut best: Vec<Option<Label>> = vec![None; n];
    let mut done = vec![false; n];
    best[s] = Some(Label { cost: 0.0, nodes: vec![s] });
    loop {
        let mut next: Option<NodeId> = None;
        for u in 0..n {
            if done[u] {
                continue;
            }
            if let Some(l) = &best[u] {
                if next.is_none_or(|v| compare(l, best[v].as_ref().unwrap()) == Ordering::Less) {
                    next = Some(u);
                }
            }
        }
        let u = next?;
        done[u] = true;
        if u == t {
            break;
        }
        let here = best[u].clone().unwrap();
        for &(v, l) in sn.neighbors(u) {
            if done[v] || residual[l] < demand {
                continue;
            }
            let mut nodes = here.nodes.clone();
            nodes.push(v);
            let cand = Label { cost: here.cost + link_cost[l], nodes };
            if best[v].as_ref().is_none_or(|b| compare(&cand, b) == Ordering::Less) {
                best[v] = Some(cand);
            }
        }
    }
    let label = best[t].take().unwrap();
    let path = sn.path_from_nodes(label.nodes).expect("labels follow existing links");
    Some((path, label.cost))
}

/// `1 / residual` per link; saturated links get an infinite cost (they are also
/// filtered out by any positive demand).
pub fn inverse_residual_costs(residual: &[u32]) -> Vec<f64> {
    residual.iter().map(|&a| if a == 0 { f64::INFINITY } else { 1.0 / a as f64 }).collect()
}

/// Sum of `costs` over the links of `path`.
pub fn path_cost(path: &SubstratePath, costs: &[f64]) -> f64 {
    path.links().iter().map(|&l: &LinkId| costs[l]).sum()
}
