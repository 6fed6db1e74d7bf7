//! Substrate and virtual network graphs, candidate sets, the augmented network and
//! residual-capacity bookkeeping.
//!
//! Capacities and demands are integral, so residuals are tracked as exact `u32`s.
//! Node and link ids are dense indices assigned at construction.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::Rejection;

pub type NodeId = usize;
pub type LinkId = usize;
pub type RequestId = u64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid substrate network: {0}")]
    InvalidNetwork(String),
    #[error("invalid virtual network request: {0}")]
    InvalidRequest(String),
    #[error("invalid substrate path: {0}")]
    InvalidPath(String),
    #[error("invalid embedding: {0}")]
    InvalidEmbedding(String),
    #[error("allocation of request {request} exceeds residual capacity of {resource}")]
    InfeasibleAllocation { request: RequestId, resource: String },
    #[error("request {0} is already allocated")]
    DuplicateAllocation(RequestId),
    #[error("request {0} is not allocated (double release?)")]
    DoubleRelease(RequestId),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubstrateNode {
    pub cpu: u32,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubstrateLink {
    pub u: NodeId,
    pub v: NodeId,
    pub bw: u32,
}

impl SubstrateLink {
    /// The endpoint of this link that is not `n`.
    pub fn other(&self, n: NodeId) -> NodeId {
        if self.u == n {
            self.v
        } else {
            self.u
        }
    }
}

/// Resource usage of one embedding, aggregated per substrate resource.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Load {
    pub cpu: BTreeMap<NodeId, u32>,
    pub bw: BTreeMap<LinkId, u32>,
}

impl Load {
    pub fn of(vn: &VnRequest, e: &Embedding) -> Self {
        let mut load = Load::default();
        for (i, &u) in e.node_map.iter().enumerate() {
            *load.cpu.entry(u).or_default() += vn.nodes()[i].cpu;
        }
        for (k, path) in e.link_map.iter().enumerate() {
            let d = vn.links()[k].bw;
            for &l in path.links() {
                *load.bw.entry(l).or_default() += d;
            }
        }
        load
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SubstrateDoc {
    nodes: Vec<SubstrateNode>,
    links: Vec<SubstrateLink>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    residual_cpu: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    residual_bw: Option<Vec<u32>>,
}

/// Undirected, simple, capacitated substrate graph with residual accounting.
///
/// Residual tables only change through [`allocate`](Self::allocate) and
/// [`release`](Self::release); the set of live allocations is runtime state and is
/// not serialized.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "SubstrateDoc", into = "SubstrateDoc")]
pub struct SubstrateNetwork {
    nodes: Vec<SubstrateNode>,
    links: Vec<SubstrateLink>,
    residual_cpu: Vec<u32>,
    residual_bw: Vec<u32>,
    adjacency: Vec<Vec<(NodeId, LinkId)>>,
    link_lookup: HashMap<(NodeId, NodeId), LinkId>,
    live: BTreeMap<RequestId, Load>,
}

impl PartialEq for SubstrateNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
            && self.links == other.links
            && self.residual_cpu == other.residual_cpu
            && self.residual_bw == other.residual_bw
    }
}

impl TryFrom<SubstrateDoc> for SubstrateNetwork {
    type Error = ModelError;

    fn try_from(doc: SubstrateDoc) -> Result<Self, ModelError> {
        let mut sn = SubstrateNetwork::new(doc.nodes, doc.links)?;
        if let Some(cpu) = doc.residual_cpu {
            if cpu.len() != sn.nodes.len() || cpu.iter().zip(&sn.nodes).any(|(r, n)| *r > n.cpu) {
                return Err(ModelError::InvalidNetwork("residual_cpu out of range".into()));
            }
            sn.residual_cpu = cpu;
        }
        if let Some(bw) = doc.residual_bw {
            if bw.len() != sn.links.len() || bw.iter().zip(&sn.links).any(|(r, l)| *r > l.bw) {
                return Err(ModelError::InvalidNetwork("residual_bw out of range".into()));
            }
            sn.residual_bw = bw;
        }
        Ok(sn)
    }
}

impl From<SubstrateNetwork> for SubstrateDoc {
    fn from(sn: SubstrateNetwork) -> Self {
        let full_cpu = sn.residual_cpu.iter().zip(&sn.nodes).all(|(r, n)| *r == n.cpu);
        let full_bw = sn.residual_bw.iter().zip(&sn.links).all(|(r, l)| *r == l.bw);
        SubstrateDoc {
            residual_cpu: (!full_cpu).then_some(sn.residual_cpu),
            residual_bw: (!full_bw).then_some(sn.residual_bw),
            nodes: sn.nodes,
            links: sn.links,
        }
    }
}

impl SubstrateNetwork {
    /// Builds a network with residuals equal to capacities.
    pub fn new(nodes: Vec<SubstrateNode>, links: Vec<SubstrateLink>) -> Result<Self, ModelError> {
        let n = nodes.len();
        let mut adjacency = vec![Vec::new(); n];
        let mut link_lookup = HashMap::with_capacity(links.len());
        for (id, l) in links.iter().enumerate() {
            if l.u >= n || l.v >= n {
                return Err(ModelError::InvalidNetwork(format!("link {id} references unknown node")));
            }
            if l.u == l.v {
                return Err(ModelError::InvalidNetwork(format!("link {id} is a self-loop")));
            }
            let key = (l.u.min(l.v), l.u.max(l.v));
            if link_lookup.insert(key, id).is_some() {
                return Err(ModelError::InvalidNetwork(format!("parallel link between {} and {}", key.0, key.1)));
            }
            adjacency[l.u].push((l.v, id));
            adjacency[l.v].push((l.u, id));
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        Ok(SubstrateNetwork {
            residual_cpu: nodes.iter().map(|n| n.cpu).collect(),
            residual_bw: links.iter().map(|l| l.bw).collect(),
            nodes,
            links,
            adjacency,
            link_lookup,
            live: BTreeMap::new(),
        })
    }

    pub fn nodes(&self) -> &[SubstrateNode] {
        &self.nodes
    }

    pub fn links(&self) -> &[SubstrateLink] {
        &self.links
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn residual_cpu(&self, u: NodeId) -> u32 {
        self.residual_cpu[u]
    }

    pub fn residual_bw(&self, l: LinkId) -> u32 {
        self.residual_bw[l]
    }

    pub fn residual_cpu_table(&self) -> &[u32] {
        &self.residual_cpu
    }

    pub fn residual_bw_table(&self) -> &[u32] {
        &self.residual_bw
    }

    /// Neighbours of `u` as `(neighbour, link)` pairs sorted by neighbour id.
    pub fn neighbors(&self, u: NodeId) -> &[(NodeId, LinkId)] {
        &self.adjacency[u]
    }

    pub fn link_between(&self, u: NodeId, v: NodeId) -> Option<LinkId> {
        self.link_lookup.get(&(u.min(v), u.max(v))).copied()
    }

    pub fn is_connected(&self) -> bool {
        connected(self.nodes.len(), self.links.iter().map(|l| (l.u, l.v)))
    }

    pub fn total_cpu(&self) -> u64 {
        self.nodes.iter().map(|n| n.cpu as u64).sum()
    }

    pub fn total_bw(&self) -> u64 {
        self.links.iter().map(|l| l.bw as u64).sum()
    }

    pub fn used_cpu(&self) -> u64 {
        self.total_cpu() - self.residual_cpu.iter().map(|&r| r as u64).sum::<u64>()
    }

    pub fn used_bw(&self) -> u64 {
        self.total_bw() - self.residual_bw.iter().map(|&r| r as u64).sum::<u64>()
    }

    /// Requests currently holding resources, with their loads.
    pub fn live_allocations(&self) -> &BTreeMap<RequestId, Load> {
        &self.live
    }

    /// Builds a path from a node sequence, resolving the links between consecutive nodes.
    pub fn path_from_nodes(&self, nodes: Vec<NodeId>) -> Result<SubstratePath, ModelError> {
        if nodes.len() < 2 {
            return Err(ModelError::InvalidPath("a path needs at least two nodes".into()));
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut links = Vec::with_capacity(nodes.len() - 1);
        for (k, &n) in nodes.iter().enumerate() {
            if n >= self.nodes.len() {
                return Err(ModelError::InvalidPath(format!("unknown node {n}")));
            }
            if std::mem::replace(&mut seen[n], true) {
                return Err(ModelError::InvalidPath(format!("node {n} repeats; path is not simple")));
            }
            if k > 0 {
                let l = self
                    .link_between(nodes[k - 1], n)
                    .ok_or_else(|| ModelError::InvalidPath(format!("no link between {} and {n}", nodes[k - 1])))?;
                links.push(l);
            }
        }
        Ok(SubstratePath { nodes, links })
    }

    /// Reserves the resources of `e` for request `vn`.
    ///
    /// Fails without touching any residual if the embedding is malformed or does
    /// not fit.
    pub fn allocate(&mut self, vn: &VnRequest, e: &Embedding) -> Result<(), ModelError> {
        if self.live.contains_key(&vn.id()) {
            return Err(ModelError::DuplicateAllocation(vn.id()));
        }
        e.validate(self, vn)?;
        let load = Load::of(vn, e);
        for (&u, &c) in &load.cpu {
            if self.residual_cpu[u] < c {
                return Err(ModelError::InfeasibleAllocation { request: vn.id(), resource: format!("node {u}") });
            }
        }
        for (&l, &b) in &load.bw {
            if self.residual_bw[l] < b {
                return Err(ModelError::InfeasibleAllocation { request: vn.id(), resource: format!("link {l}") });
            }
        }
        for (&u, &c) in &load.cpu {
            self.residual_cpu[u] -= c;
        }
        for (&l, &b) in &load.bw {
            self.residual_bw[l] -= b;
        }
        self.live.insert(vn.id(), load);
        Ok(())
    }

    /// Returns the resources held by `vn`. Exact inverse of [`allocate`](Self::allocate).
    pub fn release(&mut self, vn: &VnRequest, e: &Embedding) -> Result<(), ModelError> {
        let recorded = self.live.get(&vn.id()).ok_or(ModelError::DoubleRelease(vn.id()))?;
        if *recorded != Load::of(vn, e) {
            return Err(ModelError::InvalidEmbedding(format!(
                "release of request {} does not match its allocation",
                vn.id()
            )));
        }
        let load = self.live.remove(&vn.id()).expect("checked above");
        for (&u, &c) in &load.cpu {
            self.residual_cpu[u] += c;
        }
        for (&l, &b) in &load.bw {
            self.residual_bw[l] += b;
        }
        Ok(())
    }

    /// Drops all recorded allocations and restores residuals to full capacity.
    pub fn reset(&mut self) {
        self.residual_cpu = self.nodes.iter().map(|n| n.cpu).collect();
        self.residual_bw = self.links.iter().map(|l| l.bw).collect();
        self.live.clear();
    }

    /// Overwrites residuals directly; used to build fixtures with partial load.
    pub fn set_residuals(&mut self, cpu: Vec<u32>, bw: Vec<u32>) -> Result<(), ModelError> {
        if cpu.len() != self.nodes.len()
            || bw.len() != self.links.len()
            || cpu.iter().zip(&self.nodes).any(|(r, n)| *r > n.cpu)
            || bw.iter().zip(&self.links).any(|(r, l)| *r > l.bw)
        {
            return Err(ModelError::InvalidNetwork("residuals out of range".into()));
        }
        self.residual_cpu = cpu;
        self.residual_bw = bw;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirtualNode {
    pub cpu: u32,
    pub x: f64,
    pub y: f64,
    /// Maximum deviation allowed on each coordinate.
    pub dev: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VirtualLink {
    pub i: usize,
    pub j: usize,
    pub bw: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct VnDoc {
    id: RequestId,
    nodes: Vec<VirtualNode>,
    links: Vec<VirtualLink>,
    #[serde(default)]
    arrival: f64,
    #[serde(default)]
    lifetime: f64,
}

/// Virtual network request: an undirected, simple, connected demand graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VnDoc", into = "VnDoc")]
pub struct VnRequest {
    id: RequestId,
    nodes: Vec<VirtualNode>,
    links: Vec<VirtualLink>,
    arrival: f64,
    lifetime: f64,
    incident: Vec<Vec<usize>>,
}

impl TryFrom<VnDoc> for VnRequest {
    type Error = ModelError;

    fn try_from(d: VnDoc) -> Result<Self, ModelError> {
        VnRequest::new(d.id, d.nodes, d.links, d.arrival, d.lifetime)
    }
}

impl From<VnRequest> for VnDoc {
    fn from(r: VnRequest) -> Self {
        VnDoc { id: r.id, nodes: r.nodes, links: r.links, arrival: r.arrival, lifetime: r.lifetime }
    }
}

impl VnRequest {
    pub fn new(
        id: RequestId,
        nodes: Vec<VirtualNode>,
        links: Vec<VirtualLink>,
        arrival: f64,
        lifetime: f64,
    ) -> Result<Self, ModelError> {
        let bad = |m: String| Err(ModelError::InvalidRequest(format!("request {id}: {m}")));
        if nodes.is_empty() {
            return bad("no nodes".into());
        }
        if let Some(k) = nodes.iter().position(|n| n.cpu == 0) {
            return bad(format!("node {k} has zero cpu demand"));
        }
        if let Some(k) = nodes.iter().position(|n| !(n.dev >= 0.0)) {
            return bad(format!("node {k} has negative deviation"));
        }
        let mut incident = vec![Vec::new(); nodes.len()];
        let mut seen = std::collections::HashSet::new();
        for (k, l) in links.iter().enumerate() {
            if l.i >= nodes.len() || l.j >= nodes.len() {
                return bad(format!("link {k} references unknown node"));
            }
            if l.i == l.j {
                return bad(format!("link {k} is a self-loop"));
            }
            if l.bw == 0 {
                return bad(format!("link {k} has zero bandwidth demand"));
            }
            if !seen.insert((l.i.min(l.j), l.i.max(l.j))) {
                return bad(format!("link {k} is parallel to another link"));
            }
            incident[l.i].push(k);
            incident[l.j].push(k);
        }
        if !connected(nodes.len(), links.iter().map(|l| (l.i, l.j))) {
            return bad("graph is not connected".into());
        }
        if !(arrival >= 0.0) || !(lifetime >= 0.0) {
            return bad("arrival and lifetime must be non-negative".into());
        }
        Ok(VnRequest { id, nodes, links, arrival, lifetime, incident })
    }

    pub fn id(&self) -> RequestId {
        self.id
    }

    pub fn nodes(&self) -> &[VirtualNode] {
        &self.nodes
    }

    pub fn links(&self) -> &[VirtualLink] {
        &self.links
    }

    pub fn arrival(&self) -> f64 {
        self.arrival
    }

    pub fn lifetime(&self) -> f64 {
        self.lifetime
    }

    pub fn departure(&self) -> f64 {
        self.arrival + self.lifetime
    }

    /// Ids of links incident to virtual node `i`.
    pub fn incident_links(&self, i: usize) -> &[usize] {
        &self.incident[i]
    }
}

/// Simple substrate path as a node sequence plus the derived link sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubstratePath {
    nodes: Vec<NodeId>,
    links: Vec<LinkId>,
}

impl SubstratePath {
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn links(&self) -> &[LinkId] {
        &self.links
    }

    pub fn source(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn target(&self) -> NodeId {
        *self.nodes.last().expect("paths are non-empty")
    }

    pub fn hops(&self) -> usize {
        self.links.len()
    }
}

/// An accepted mapping of one request onto the substrate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    /// Substrate host of each virtual node.
    pub node_map: Vec<NodeId>,
    /// Substrate path of each virtual link, oriented from `i` to `j`.
    pub link_map: Vec<SubstratePath>,
    /// Load-balancing objective evaluated on the residuals the embedding was computed against.
    pub objective: f64,
}

impl Embedding {
    /// Structural check: sizes, injectivity, path endpoints, simplicity and link existence.
    /// Capacity is checked by [`SubstrateNetwork::allocate`].
    pub fn validate(&self, sn: &SubstrateNetwork, vn: &VnRequest) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidEmbedding(format!("request {}: {m}", vn.id())));
        if self.node_map.len() != vn.nodes().len() {
            return bad("node map size mismatch".into());
        }
        if self.link_map.len() != vn.links().len() {
            return bad("link map size mismatch".into());
        }
        let mut hosts = std::collections::HashSet::new();
        for (i, &u) in self.node_map.iter().enumerate() {
            if u >= sn.node_count() {
                return bad(format!("virtual node {i} mapped to unknown node {u}"));
            }
            if !hosts.insert(u) {
                return bad(format!("substrate node {u} hosts two virtual nodes"));
            }
        }
        for (k, (l, p)) in vn.links().iter().zip(&self.link_map).enumerate() {
            if p.source() != self.node_map[l.i] || p.target() != self.node_map[l.j] {
                return bad(format!("path of virtual link {k} has wrong endpoints"));
            }
            let rebuilt = sn.path_from_nodes(p.nodes().to_vec())?;
            if rebuilt.links() != p.links() {
                return bad(format!("path of virtual link {k} has inconsistent links"));
            }
        }
        Ok(())
    }
}

/// Load-balancing objective of a mapping against the current residuals:
/// `sum_ij D_ij * sum_{l in path} 1/A_l + sum_i 1/A_{host(i)}`.
pub fn embedding_objective(
    sn: &SubstrateNetwork,
    vn: &VnRequest,
    node_map: &[NodeId],
    link_map: &[SubstratePath],
) -> f64 {
    let links: f64 = vn
        .links()
        .iter()
        .zip(link_map)
        .map(|(vl, p)| vl.bw as f64 * p.links().iter().map(|&l| 1.0 / sn.residual_bw(l) as f64).sum::<f64>())
        .sum();
    let nodes: f64 = node_map.iter().map(|&u| 1.0 / sn.residual_cpu(u) as f64).sum();
    links + nodes
}

/// Candidate hosts of virtual node `i`: enough residual CPU and inside the
/// per-coordinate deviation box around the requested location.
pub fn candidate_set(i: usize, sn: &SubstrateNetwork, vn: &VnRequest) -> Vec<NodeId> {
    let v = &vn.nodes()[i];
    (0..sn.node_count())
        .filter(|&u| {
            let s = &sn.nodes()[u];
            sn.residual_cpu(u) >= v.cpu && (s.x - v.x).abs() <= v.dev && (s.y - v.y).abs() <= v.dev
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MetaLink {
    pub virtual_node: usize,
    pub substrate_node: NodeId,
}

/// Substrate network extended with one meta-link from every virtual node to each
/// of its candidate hosts.
#[derive(Debug, Clone)]
pub struct AugmentedNetwork<'a> {
    pub base: &'a SubstrateNetwork,
    pub vn: &'a VnRequest,
    pub candidate_sets: Vec<Vec<NodeId>>,
    pub meta_links: Vec<MetaLink>,
}

impl AugmentedNetwork<'_> {
    pub fn candidates(&self, i: usize) -> &[NodeId] {
        &self.candidate_sets[i]
    }

    pub fn is_candidate(&self, i: usize, u: NodeId) -> bool {
        self.candidate_sets[i].binary_search(&u).is_ok()
    }
}

pub fn build_augmented<'a>(sn: &'a SubstrateNetwork, vn: &'a VnRequest) -> Result<AugmentedNetwork<'a>, Rejection> {
    let candidate_sets: Vec<Vec<NodeId>> = (0..vn.nodes().len()).map(|i| candidate_set(i, sn, vn)).collect();
    if let Some(i) = candidate_sets.iter().position(Vec::is_empty) {
        return Err(Rejection::EmptyCandidateSet { virtual_node: i });
    }
    let meta_links = candidate_sets
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.iter().map(move |&u| MetaLink { virtual_node: i, substrate_node: u }))
        .collect();
    Ok(AugmentedNetwork { base: sn, vn, candidate_sets, meta_links })
}

fn connected(n: usize, edges: impl Iterator<Item = (usize, usize)>) -> bool {
    if n == 0 {
        return true;
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut components = n;
    for (a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            components -= 1;
        }
    }
    components == 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, cpu: u32, bw: u32) -> SubstrateNetwork {
        let nodes = (0..n).map(|k| SubstrateNode { cpu, x: k as f64 * 100.0, y: 0.0 }).collect();
        let links = (1..n).map(|k| SubstrateLink { u: k - 1, v: k, bw }).collect();
        SubstrateNetwork::new(nodes, links).unwrap()
    }

    fn vnode(cpu: u32, x: f64, y: f64, dev: f64) -> VirtualNode {
        VirtualNode { cpu, x, y, dev }
    }

    #[test]
    fn rejects_self_loops_and_parallel_links() {
        let nodes = vec![SubstrateNode { cpu: 1, x: 0.0, y: 0.0 }; 2];
        let lp = SubstrateLink { u: 0, v: 0, bw: 1 };
        assert!(SubstrateNetwork::new(nodes.clone(), vec![lp]).is_err());
        let a = SubstrateLink { u: 0, v: 1, bw: 1 };
        let b = SubstrateLink { u: 1, v: 0, bw: 1 };
        assert!(SubstrateNetwork::new(nodes, vec![a, b]).is_err());
    }

    #[test]
    fn rejects_disconnected_or_zero_demand_requests() {
        let nodes = vec![vnode(1, 0.0, 0.0, 1.0); 3];
        let links = vec![VirtualLink { i: 0, j: 1, bw: 1 }];
        assert!(VnRequest::new(0, nodes.clone(), links, 0.0, 1.0).is_err());
        let links = vec![VirtualLink { i: 0, j: 1, bw: 0 }, VirtualLink { i: 1, j: 2, bw: 1 }];
        assert!(VnRequest::new(0, nodes, links, 0.0, 1.0).is_err());
    }

    #[test]
    fn zero_deviation_selects_the_colocated_node() {
        let sn = line(4, 50, 50);
        let vn = VnRequest::new(0, vec![vnode(10, 200.0, 0.0, 0.0)], vec![], 0.0, 1.0).unwrap();
        assert_eq!(candidate_set(0, &sn, &vn), vec![2]);
    }

    #[test]
    fn oversized_demand_has_no_candidates() {
        let sn = line(4, 50, 50);
        let vn = VnRequest::new(0, vec![vnode(51, 0.0, 0.0, 1000.0)], vec![], 0.0, 1.0).unwrap();
        assert!(candidate_set(0, &sn, &vn).is_empty());
        assert_eq!(build_augmented(&sn, &vn).unwrap_err(), Rejection::EmptyCandidateSet { virtual_node: 0 });
    }

    #[test]
    fn candidate_set_matches_brute_force_box_scan() {
        let coords = [(0.0, 0.0), (120.0, 40.0), (151.0, 0.0), (-150.0, 150.0), (30.0, -160.0)];
        let cpus = [10, 10, 10, 3, 10];
        let nodes = coords.iter().zip(cpus).map(|(&(x, y), cpu)| SubstrateNode { cpu, x, y }).collect();
        let links = (1..5).map(|k| SubstrateLink { u: 0, v: k, bw: 10 }).collect();
        let sn = SubstrateNetwork::new(nodes, links).unwrap();
        let vn = VnRequest::new(0, vec![vnode(5, 0.0, 0.0, 150.0)], vec![], 0.0, 1.0).unwrap();
        // 0: inside; 1: inside; 2: dx 151; 3: cpu 3 < 5; 4: dy 160.
        let mut expected = Vec::new();
        for u in 0..5 {
            let (x, y) = coords[u];
            if cpus[u] >= 5 && f64::abs(x) <= 150.0 && f64::abs(y) <= 150.0 {
                expected.push(u);
            }
        }
        assert_eq!(expected, vec![0, 1]);
        assert_eq!(candidate_set(0, &sn, &vn), expected);
    }

    #[test]
    fn shared_link_carries_the_sum_of_demands() {
        // Triangle request on a path 0-1-2-3: links (0,1) and (0,2) both cross substrate link 0-1.
        let mut sn = line(4, 100, 100);
        let nodes = vec![vnode(1, 0.0, 0.0, 1e9); 3];
        let links = vec![
            VirtualLink { i: 0, j: 1, bw: 10 },
            VirtualLink { i: 0, j: 2, bw: 15 },
            VirtualLink { i: 1, j: 2, bw: 5 },
        ];
        let vn = VnRequest::new(7, nodes, links, 0.0, 1.0).unwrap();
        let e = Embedding {
            node_map: vec![0, 1, 2],
            link_map: vec![
                sn.path_from_nodes(vec![0, 1]).unwrap(),
                sn.path_from_nodes(vec![0, 1, 2]).unwrap(),
                sn.path_from_nodes(vec![1, 2]).unwrap(),
            ],
            objective: 0.0,
        };
        let before = sn.clone();
        sn.allocate(&vn, &e).unwrap();
        assert_eq!(sn.residual_bw(0), 100 - 25);
        assert_eq!(sn.residual_bw(1), 100 - 20);
        sn.release(&vn, &e).unwrap();
        assert_eq!(sn, before);
        assert_eq!(sn.release(&vn, &e), Err(ModelError::DoubleRelease(7)));
    }

    #[test]
    fn infeasible_allocation_leaves_residuals_untouched() {
        let mut sn = line(3, 100, 20);
        let nodes = vec![vnode(1, 0.0, 0.0, 1e9); 2];
        let vn = VnRequest::new(1, nodes, vec![VirtualLink { i: 0, j: 1, bw: 30 }], 0.0, 1.0).unwrap();
        let e = Embedding {
            node_map: vec![0, 2],
            link_map: vec![sn.path_from_nodes(vec![0, 1, 2]).unwrap()],
            objective: 0.0,
        };
        let before = sn.clone();
        assert!(matches!(sn.allocate(&vn, &e), Err(ModelError::InfeasibleAllocation { .. })));
        assert_eq!(sn, before);
        assert!(sn.live_allocations().is_empty());
    }

    #[test]
    fn validate_rejects_non_injective_maps() {
        let sn = line(3, 100, 100);
        let nodes = vec![vnode(1, 0.0, 0.0, 1e9); 2];
        let vn = VnRequest::new(1, nodes, vec![VirtualLink { i: 0, j: 1, bw: 1 }], 0.0, 1.0).unwrap();
        let p = sn.path_from_nodes(vec![0, 1]).unwrap();
        let e = Embedding { node_map: vec![0, 0], link_map: vec![p], objective: 0.0 };
        assert!(e.validate(&sn, &vn).is_err());
    }

    #[test]
    fn path_from_nodes_requires_simple_connected_sequences() {
        let sn = line(4, 1, 1);
        assert!(sn.path_from_nodes(vec![0, 1, 0]).is_err());
        assert!(sn.path_from_nodes(vec![0, 2]).is_err());
        assert_eq!(sn.path_from_nodes(vec![0, 1, 2]).unwrap().links(), &[0, 1]);
    }

    #[test]
    fn json_round_trip_preserves_residuals() {
        let mut sn = line(3, 100, 40);
        sn.set_residuals(vec![90, 100, 80], vec![40, 10]).unwrap();
        let text = serde_json::to_string(&sn).unwrap();
        let back: SubstrateNetwork = serde_json::from_str(&text).unwrap();
        assert_eq!(back, sn);
        let bad = r#"{"nodes":[{"cpu":1,"x":0,"y":0}],"links":[{"u":0,"v":0,"bw":1}]}"#;
        assert!(serde_json::from_str::<SubstrateNetwork>(bad).is_err());
    }
}
