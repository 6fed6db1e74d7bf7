//! Waxman topologies grown incrementally, and Poisson request workloads.
//!
//! All randomness comes from [`ChaCha8Rng`] streams derived with [`rng`], so a
//! seed fixes every generated instance on every platform.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{RequestId, SubstrateLink, SubstrateNetwork, SubstrateNode, VirtualLink, VirtualNode, VnRequest};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopogenError {
    #[error("a topology needs at least two nodes, got {0}")]
    DegenerateGraph(usize),
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
}

/// Seeded generator for one independent stream of a run.
pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaxmanParams {
    pub n_nodes: usize,
    /// Side of the square placement plane.
    pub hs: f64,
    /// Side of the inner plane. Accepted for configuration compatibility, not used by placement.
    pub ls: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Links each new node tries to create while the graph grows.
    pub m_neighbors: usize,
    /// Node CPU and link bandwidth capacities are drawn uniformly from `cap_min..=cap_max`.
    pub cap_min: u32,
    pub cap_max: u32,
}

impl WaxmanParams {
    pub fn validate(&self) -> Result<(), TopogenError> {
        let bad = |m: &str| Err(TopogenError::InvalidParams(m.into()));
        if self.n_nodes < 2 {
            return Err(TopogenError::DegenerateGraph(self.n_nodes));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) || !(self.beta > 0.0 && self.beta <= 1.0) {
            return bad("alpha and beta must lie in (0, 1]");
        }
        if self.m_neighbors < 1 {
            return bad("m_neighbors must be at least 1");
        }
        if !(self.hs > 0.0) {
            return bad("hs must be positive");
        }
        if self.cap_min == 0 || self.cap_min > self.cap_max {
            return bad("capacity range must be non-empty and positive");
        }
        Ok(())
    }
}

/// Node positions and undirected edges of a generated topology.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub positions: Vec<(f64, f64)>,
    pub edges: Vec<(usize, usize)>,
}

/// Waxman graph grown one node at a time. The first `m + 1` nodes form a clique;
/// each later node draws up to `|existing|` uniformly chosen partners and links to
/// each with probability `alpha * exp(-d / (beta * L))` until it has `m` links,
/// then tops up with its nearest unlinked nodes.
pub fn waxman_topology(
    n: usize,
    hs: f64,
    alpha: f64,
    beta: f64,
    m: usize,
    rng: &mut impl Rng,
) -> Result<Topology, TopogenError> {
    if n < 2 {
        return Err(TopogenError::DegenerateGraph(n));
    }
    let positions: Vec<(f64, f64)> = (0..n).map(|_| (rng.random_range(0.0..hs), rng.random_range(0.0..hs))).collect();
    let dist = |a: usize, b: usize| {
        let (p, q) = (positions[a], positions[b]);
        ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt()
    };
    let max_dist = hs * std::f64::consts::SQRT_2;
    let seed = (m + 1).min(n);
    let mut edges = Vec::new();
    for a in 0..seed {
        for b in a + 1..seed {
            edges.push((a, b));
        }
    }
    for k in seed..n {
        let mut linked = vec![false; k];
        let mut count = 0;
        for _ in 0..k {
            if count == m {
                break;
            }
            let v = rng.random_range(0..k);
            if linked[v] {
                continue;
            }
            let p = alpha * (-dist(k, v) / (beta * max_dist)).exp();
            if rng.random_bool(p) {
                linked[v] = true;
                count += 1;
            }
        }
        if count < m {
            let mut rest: Vec<usize> = (0..k).filter(|&v| !linked[v]).collect();
            rest.sort_by(|&a, &b| dist(k, a).total_cmp(&dist(k, b)).then(a.cmp(&b)));
            for v in rest.into_iter().take(m - count) {
                linked[v] = true;
            }
        }
        edges.extend((0..k).filter(|&v| linked[v]).map(|v| (v, k)));
    }
    Ok(Topology { positions, edges })
}

/// Substrate network on a Waxman topology with uniform integer capacities.
pub fn gen_waxman(p: &WaxmanParams, rng: &mut impl Rng) -> Result<SubstrateNetwork, TopogenError> {
    p.validate()?;
    let topo = waxman_topology(p.n_nodes, p.hs, p.alpha, p.beta, p.m_neighbors, rng)?;
    let nodes = topo
        .positions
        .iter()
        .map(|&(x, y)| SubstrateNode { cpu: rng.random_range(p.cap_min..=p.cap_max), x, y })
        .collect();
    let links =
        topo.edges.iter().map(|&(u, v)| SubstrateLink { u, v, bw: rng.random_range(p.cap_min..=p.cap_max) }).collect();
    SubstrateNetwork::new(nodes, links)
        .map_err(|e| TopogenError::InvalidParams(format!("generated network rejected: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadParams {
    /// Requests per time unit.
    pub arrival_rate: f64,
    pub mean_lifetime: f64,
    pub n_arrivals: usize,
    pub vn_size_min: usize,
    pub vn_size_max: usize,
    pub cpu_min: u32,
    pub cpu_max: u32,
    pub bw_min: u32,
    pub bw_max: u32,
    pub dev_min: f64,
    pub dev_max: f64,
    /// Waxman parameters of the request topologies.
    pub alpha: f64,
    pub beta: f64,
    pub m_neighbors: usize,
}

impl WorkloadParams {
    pub fn validate(&self) -> Result<(), TopogenError> {
        let bad = |m: &str| Err(TopogenError::InvalidParams(m.into()));
        if !(self.arrival_rate > 0.0) || !(self.mean_lifetime > 0.0) {
            return bad("arrival rate and mean lifetime must be positive");
        }
        if self.vn_size_min < 1 || self.vn_size_min > self.vn_size_max {
            return bad("request size range must be non-empty");
        }
        if self.cpu_min == 0 || self.cpu_min > self.cpu_max {
            return bad("cpu demand range must be non-empty and positive");
        }
        if self.bw_min == 0 || self.bw_min > self.bw_max {
            return bad("bandwidth demand range must be non-empty and positive");
        }
        if !(self.dev_min >= 0.0 && self.dev_min <= self.dev_max) {
            return bad("deviation range must be non-empty and non-negative");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) || !(self.beta > 0.0 && self.beta <= 1.0) {
            return bad("alpha and beta must lie in (0, 1]");
        }
        if self.m_neighbors < 1 {
            return bad("m_neighbors must be at least 1");
        }
        Ok(())
    }
}

/// One request with random size, topology, demands and location, placed on a
/// `sn_extent`-sided grid.
pub fn gen_request(
    p: &WorkloadParams,
    sn_extent: f64,
    id: RequestId,
    arrival: f64,
    lifetime: f64,
    rng: &mut impl Rng,
) -> Result<VnRequest, TopogenError> {
    let size = rng.random_range(p.vn_size_min..=p.vn_size_max);
    let topo = if size == 1 {
        Topology {
            positions: vec![(rng.random_range(0.0..sn_extent), rng.random_range(0.0..sn_extent))],
            edges: vec![],
        }
    } else {
        waxman_topology(size, sn_extent, p.alpha, p.beta, p.m_neighbors, rng)?
    };
    let nodes = topo
        .positions
        .iter()
        .map(|&(x, y)| VirtualNode {
            cpu: rng.random_range(p.cpu_min..=p.cpu_max),
            x,
            y,
            dev: if p.dev_min == p.dev_max { p.dev_min } else { rng.random_range(p.dev_min..p.dev_max) },
        })
        .collect();
    let links =
        topo.edges.iter().map(|&(i, j)| VirtualLink { i, j, bw: rng.random_range(p.bw_min..=p.bw_max) }).collect();
    VnRequest::new(id, nodes, links, arrival, lifetime)
        .map_err(|e| TopogenError::InvalidParams(format!("generated request rejected: {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    Arrival,
    Departure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub request: RequestId,
}

/// Requests indexed by id, plus their arrival and departure events in processing order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub requests: Vec<VnRequest>,
    pub events: Vec<Event>,
}

/// Poisson arrivals with exponential lifetimes: `(arrival, lifetime)` per request.
pub fn arrival_schedule(p: &WorkloadParams, rng: &mut impl Rng) -> Vec<(f64, f64)> {
    let gap = Exp::new(p.arrival_rate).expect("positive rate");
    let life = Exp::new(1.0 / p.mean_lifetime).expect("positive mean");
    let mut t = 0.0;
    (0..p.n_arrivals)
        .map(|_| {
            t += gap.sample(rng);
            (t, life.sample(rng))
        })
        .collect()
}

/// Events sorted by time; at equal times arrivals come first, then lower ids.
pub fn sort_events(events: &mut [Event]) {
    events.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.kind.cmp(&b.kind)).then(a.request.cmp(&b.request)));
}

pub fn gen_workload(p: &WorkloadParams, sn_extent: f64, rng: &mut impl Rng) -> Result<Workload, TopogenError> {
    p.validate()?;
    let schedule = arrival_schedule(p, rng);
    let mut requests = Vec::with_capacity(schedule.len());
    let mut events = Vec::with_capacity(2 * schedule.len());
    for (k, &(arrival, lifetime)) in schedule.iter().enumerate() {
        let id = k as RequestId;
        requests.push(gen_request(p, sn_extent, id, arrival, lifetime, rng)?);
        events.push(Event { time: arrival, kind: EventKind::Arrival, request: id });
        events.push(Event { time: arrival + lifetime, kind: EventKind::Departure, request: id });
    }
    sort_events(&mut events);
    Ok(Workload { requests, events })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_ii_substrate(n: usize) -> WaxmanParams {
        WaxmanParams {
            n_nodes: n,
            hs: 500.0,
            ls: 500.0,
            alpha: 0.15,
            beta: 0.2,
            m_neighbors: 3,
            cap_min: 50,
            cap_max: 100,
        }
    }

    #[test]
    fn two_nodes_give_one_link() {
        let p = WaxmanParams { n_nodes: 2, m_neighbors: 1, ..table_ii_substrate(2) };
        let sn = gen_waxman(&p, &mut rng(1, 0)).unwrap();
        assert_eq!(sn.link_count(), 1);
    }

    #[test]
    fn single_node_is_degenerate() {
        let p = table_ii_substrate(1);
        assert_eq!(gen_waxman(&p, &mut rng(1, 0)), Err(TopogenError::DegenerateGraph(1)));
    }

    #[test]
    fn grown_nodes_have_at_least_m_links() {
        for seed in 0..50 {
            let sn = gen_waxman(&table_ii_substrate(20), &mut rng(seed, 0)).unwrap();
            assert!(sn.is_connected());
            for u in 4..20 {
                assert!(sn.neighbors(u).len() >= 3, "seed {seed} node {u}");
            }
            for l in sn.links() {
                assert!((50..=100).contains(&l.bw));
            }
            for n in sn.nodes() {
                assert!((50..=100).contains(&n.cpu));
                assert!(n.x >= 0.0 && n.x < 500.0 && n.y >= 0.0 && n.y < 500.0);
            }
        }
    }

    #[test]
    fn events_order_arrivals_before_departures_at_equal_times() {
        let mut ev = vec![
            Event { time: 1.0, kind: EventKind::Departure, request: 0 },
            Event { time: 1.0, kind: EventKind::Arrival, request: 2 },
            Event { time: 1.0, kind: EventKind::Arrival, request: 1 },
            Event { time: 0.5, kind: EventKind::Departure, request: 3 },
        ];
        sort_events(&mut ev);
        let order: Vec<u64> = ev.iter().map(|e| e.request).collect();
        assert_eq!(order, vec![3, 1, 2, 0]);
    }
}
