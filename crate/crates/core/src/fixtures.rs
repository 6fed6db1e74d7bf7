//! Small hand-built instances with known answers, for tests and examples.

use std::collections::BTreeMap;

use rand::Rng;

use crate::model::{
    candidate_set, embedding_objective, Embedding, MetaLink, NodeId, SubstrateLink, SubstrateNetwork, SubstrateNode,
    SubstratePath, VirtualLink, VirtualNode, VnRequest,
};
use crate::pathgen::DualPrices;

/// Substrate nodes of the running example, `A` to `G`.
pub const A: usize = 0;
pub const B: usize = 1;
pub const C: usize = 2;
pub const D: usize = 3;
pub const E: usize = 4;
pub const F: usize = 5;
pub const G: usize = 6;

/// Virtual nodes of the running example.
pub const X: usize = 0;
pub const Y: usize = 1;
pub const Z: usize = 2;

/// Virtual links of the running example: `XZ` (demand 20) and `XY` (demand 10).
pub const XZ: usize = 0;
pub const XY: usize = 1;

pub fn node_name(u: usize) -> char {
    (b'A' + u as u8) as char
}

/// Seven-node substrate of the running example. Node `C` has incident residuals
/// 50, 60 and 70.
pub fn running_substrate() -> SubstrateNetwork {
    let at = |x: f64, y: f64| SubstrateNode { cpu: 100, x, y };
    let nodes = vec![
        at(100.0, 300.0),
        at(200.0, 300.0),
        at(100.0, 200.0),
        at(200.0, 200.0),
        at(300.0, 300.0),
        at(300.0, 150.0),
        at(150.0, 100.0),
    ];
    let link = |u, v, bw| SubstrateLink { u, v, bw };
    let links = vec![
        link(A, B, 80),
        link(A, C, 50),
        link(B, E, 70),
        link(B, D, 60),
        link(C, D, 60),
        link(C, G, 70),
        link(E, F, 50),
        link(F, G, 50),
    ];
    SubstrateNetwork::new(nodes, links).expect("valid fixture")
}

/// Three-node request of the running example, with candidate sets
/// `X -> {A, C}`, `Y -> {C, G}` and `Z -> {B, D, E}`.
pub fn running_request() -> VnRequest {
    let nodes = vec![
        VirtualNode { cpu: 5, x: 100.0, y: 250.0, dev: 50.0 },
        VirtualNode { cpu: 5, x: 125.0, y: 150.0, dev: 50.0 },
        VirtualNode { cpu: 5, x: 250.0, y: 275.0, dev: 75.0 },
    ];
    let links = vec![VirtualLink { i: X, j: Z, bw: 20 }, VirtualLink { i: X, j: Y, bw: 10 }];
    VnRequest::new(0, nodes, links, 0.0, 60.0).expect("valid fixture")
}

/// Dual prices annotated on the running example for pricing virtual link `XZ`.
pub fn running_prices(sn: &SubstrateNetwork) -> DualPrices {
    let mut gamma = vec![10.0; sn.link_count()];
    for (u, v, g) in [(A, B, 2.0), (B, E, 5.0), (B, D, 2.0), (A, C, 3.0), (C, D, 4.0)] {
        gamma[sn.link_between(u, v).expect("fixture link")] = g;
    }
    let meta = |virtual_node, substrate_node| MetaLink { virtual_node, substrate_node };
    let sigma: BTreeMap<MetaLink, f64> = [(meta(X, A), 1.0), (meta(X, C), 3.0)].into_iter().collect();
    let tau: BTreeMap<MetaLink, f64> = [(meta(Z, B), 1.5), (meta(Z, D), 2.0), (meta(Z, E), 3.0)].into_iter().collect();
    DualPrices {
        lambda: vec![0.0; 3],
        mu: vec![0.0; 2],
        eta: vec![0.0; sn.node_count()],
        gamma,
        sigma_path: vec![],
        tau_path: vec![],
        sigma,
        tau,
        objective: 0.0,
    }
}

/// Random connected substrate of 3 to 6 nodes and a random connected request of 2
/// or 3 nodes, small enough for exhaustive enumeration.
pub fn random_tiny_instance(rng: &mut impl Rng) -> (SubstrateNetwork, VnRequest) {
    let n = rng.random_range(3..=6);
    let m = rng.random_range(2..=3);
    (random_substrate(n, rng), random_request(m, 40.0..110.0, rng))
}

/// Connected substrate on a 100 x 100 square with CPU in [5, 20] and bandwidth in [5, 30].
pub fn random_substrate(n: usize, rng: &mut impl Rng) -> SubstrateNetwork {
    let nodes = (0..n)
        .map(|_| SubstrateNode {
            cpu: rng.random_range(5..=20),
            x: rng.random_range(0.0..100.0),
            y: rng.random_range(0.0..100.0),
        })
        .collect();
    let links = random_connected_edges(n, 0.4, rng)
        .into_iter()
        .map(|(u, v)| SubstrateLink { u, v, bw: rng.random_range(5..=30) })
        .collect();
    SubstrateNetwork::new(nodes, links).expect("connected by construction")
}

/// Connected request with CPU in [1, 10], bandwidth in [1, 15] and deviations drawn from `dev`.
pub fn random_request(m: usize, dev: std::ops::Range<f64>, rng: &mut impl Rng) -> VnRequest {
    let vnodes = (0..m)
        .map(|_| VirtualNode {
            cpu: rng.random_range(1..=10),
            x: rng.random_range(0.0..100.0),
            y: rng.random_range(0.0..100.0),
            dev: rng.random_range(dev.clone()),
        })
        .collect();
    let vlinks = random_connected_edges(m, 0.5, rng)
        .into_iter()
        .map(|(i, j)| VirtualLink { i, j, bw: rng.random_range(1..=15) })
        .collect();
    VnRequest::new(0, vnodes, vlinks, 0.0, 1.0).expect("connected by construction")
}

/// Random spanning tree plus each remaining pair with probability `p`.
fn random_connected_edges(n: usize, p: f64, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.random_range(0..v), v)).collect();
    for v in 0..n {
        for w in v + 1..n {
            if !edges.contains(&(v, w)) && rng.random_bool(p) {
                edges.push((v, w));
            }
        }
    }
    edges
}

/// Every simple path from `s` to `t` over links with residual at least `demand`.
pub fn simple_paths(sn: &SubstrateNetwork, s: NodeId, t: NodeId, demand: u32) -> Vec<SubstratePath> {
    fn walk(sn: &SubstrateNetwork, t: NodeId, demand: u32, stack: &mut Vec<NodeId>, out: &mut Vec<SubstratePath>) {
        let u = *stack.last().expect("non-empty");
        if u == t {
            out.push(sn.path_from_nodes(stack.clone()).expect("walk follows links"));
            return;
        }
        for &(v, l) in sn.neighbors(u) {
            if sn.residual_bw(l) >= demand && !stack.contains(&v) {
                stack.push(v);
                walk(sn, t, demand, stack, out);
                stack.pop();
            }
        }
    }
    let mut out = Vec::new();
    walk(sn, t, demand, &mut vec![s], &mut out);
    out
}

/// Minimum-objective embedding by enumerating every injective node map inside the
/// candidate sets and every combination of simple paths, keeping only jointly
/// capacity-feasible ones.
pub fn exhaustive_optimum(sn: &SubstrateNetwork, vn: &VnRequest) -> Option<Embedding> {
    let cands: Vec<Vec<NodeId>> = (0..vn.nodes().len()).map(|i| candidate_set(i, sn, vn)).collect();
    let mut best: Option<Embedding> = None;
    let mut map = Vec::new();
    node_maps(&cands, &mut map, &mut |node_map| {
        let options: Vec<Vec<SubstratePath>> =
            vn.links().iter().map(|l| simple_paths(sn, node_map[l.i], node_map[l.j], l.bw)).collect();
        let mut chosen = Vec::new();
        path_choices(sn, vn, &options, &mut chosen, &mut vec![0; sn.link_count()], &mut |link_map| {
            let objective = embedding_objective(sn, vn, node_map, link_map);
            if best.as_ref().is_none_or(|b| objective < b.objective) {
                best = Some(Embedding { node_map: node_map.to_vec(), link_map: link_map.to_vec(), objective });
            }
        });
    });
    best
}

fn node_maps(cands: &[Vec<NodeId>], map: &mut Vec<NodeId>, f: &mut impl FnMut(&[NodeId])) {
    if map.len() == cands.len() {
        f(map);
        return;
    }
    for &u in &cands[map.len()] {
        if !map.contains(&u) {
            map.push(u);
            node_maps(cands, map, f);
            map.pop();
        }
    }
}

fn path_choices(
    sn: &SubstrateNetwork,
    vn: &VnRequest,
    options: &[Vec<SubstratePath>],
    chosen: &mut Vec<SubstratePath>,
    used: &mut Vec<u32>,
    f: &mut impl FnMut(&[SubstratePath]),
) {
    let k = chosen.len();
    if k == options.len() {
        f(chosen);
        return;
    }
    let d = vn.links()[k].bw;
    for p in &options[k] {
        if p.links().iter().all(|&l| used[l] + d <= sn.residual_bw(l)) {
            p.links().iter().for_each(|&l| used[l] += d);
            chosen.push(p.clone());
            path_choices(sn, vn, options, chosen, used, f);
            chosen.pop();
            p.links().iter().for_each(|&l| used[l] -= d);
        }
    }
}
