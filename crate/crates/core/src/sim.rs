//! Discrete-event simulation of online request arrivals and departures.

use std::collections::{BTreeMap, HashMap};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{Gnmsp, VineOpt};
use crate::embed::{Embedder, StageTime};
use crate::milp::BipStats;
use crate::model::{Embedding, RequestId, SubstrateNetwork, VnRequest};
use crate::pathgen::{PathGen, PathGenOptions};
use crate::topogen::{self, EventKind, TopogenError, WaxmanParams, Workload, WorkloadParams};

/// Revenue of a request: its total node and link demand.
pub fn revenue(vn: &VnRequest) -> f64 {
    let nodes: u64 = vn.nodes().iter().map(|n| n.cpu as u64).sum();
    let links: u64 = vn.links().iter().map(|l| l.bw as u64).sum();
    (nodes + links) as f64
}

/// Substrate resources spent on an embedding: node demand plus link demand times path length.
pub fn cost(vn: &VnRequest, e: &Embedding) -> f64 {
    let nodes: u64 = vn.nodes().iter().map(|n| n.cpu as u64).sum();
    let links: u64 = vn.links().iter().zip(&e.link_map).map(|(l, p)| l.bw as u64 * p.hops() as u64).sum();
    (nodes + links) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    Pathgen,
    Vineopt,
    Gnmsp,
}

impl EmbedderKind {
    pub const ALL: [EmbedderKind; 3] = [EmbedderKind::Pathgen, EmbedderKind::Vineopt, EmbedderKind::Gnmsp];

    pub fn name(self) -> &'static str {
        match self {
            EmbedderKind::Pathgen => "pathgen",
            EmbedderKind::Vineopt => "vineopt",
            EmbedderKind::Gnmsp => "gnmsp",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn build(
        self,
        iterations: usize,
        time_limit: Option<Duration>,
        work_limit: Option<usize>,
    ) -> Box<dyn Embedder> {
        match self {
            EmbedderKind::Pathgen => {
                Box::new(PathGen { options: PathGenOptions { iterations, time_limit, work_limit } })
            }
            EmbedderKind::Vineopt => Box::new(VineOpt { time_limit, work_limit }),
            EmbedderKind::Gnmsp => Box::new(Gnmsp),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub embedder: EmbedderKind,
    pub substrate: WaxmanParams,
    pub workload: WorkloadParams,
    /// Simulated time between metric samples.
    pub sample_interval: f64,
    /// Per-request wall-clock limit in seconds.
    pub time_limit_s: Option<f64>,
    /// Per-request simplex-iteration budget of the branch-and-bound searches;
    /// binds at the same point on every run, unlike the time limit.
    #[serde(default)]
    pub work_limit: Option<usize>,
    /// Pricing rounds of the path-generation embedder.
    pub iterations: usize,
    pub seed: u64,
}

impl SimConfig {
    /// 20-node substrate, requests of 3 to 10 nodes.
    pub fn paper_small() -> Self {
        Self::evaluation(20, 3, 10)
    }

    /// 100-node substrate, requests of 15 to 25 nodes.
    pub fn paper_large() -> Self {
        Self::evaluation(100, 15, 25)
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "paper-small" => Some(Self::paper_small()),
            "paper-large" => Some(Self::paper_large()),
            _ => None,
        }
    }

    fn evaluation(n_nodes: usize, vn_size_min: usize, vn_size_max: usize) -> Self {
        SimConfig {
            embedder: EmbedderKind::Pathgen,
            substrate: WaxmanParams {
                n_nodes,
                hs: 500.0,
                ls: 500.0,
                alpha: 0.15,
                beta: 0.2,
                m_neighbors: 3,
                cap_min: 50,
                cap_max: 100,
            },
            workload: WorkloadParams {
                arrival_rate: 1.0 / 3.0,
                mean_lifetime: 60.0,
                n_arrivals: 1500,
                vn_size_min,
                vn_size_max,
                cpu_min: 2,
                cpu_max: 10,
                bw_min: 10,
                bw_max: 20,
                dev_min: 100.0,
                dev_max: 150.0,
                alpha: 0.15,
                beta: 0.2,
                m_neighbors: 2,
            },
            sample_interval: 10.0,
            time_limit_s: Some(60.0),
            work_limit: None,
            iterations: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Generation(#[from] TopogenError),
    #[error("invariant violated at t = {time}: {message}")]
    Invariant { time: f64, message: String },
}

/// Network state and cumulative totals at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub time: f64,
    pub arrivals: u64,
    pub accepted: u64,
    pub acceptance_ratio: f64,
    pub node_utilization: f64,
    pub link_utilization: f64,
    pub revenue: f64,
    pub cost: f64,
    pub profit: f64,
    pub live: usize,
}

/// One processed event with the state right after it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub kind: EventKind,
    pub request: RequestId,
    pub state: Sample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub id: RequestId,
    pub arrival: f64,
    pub departure: f64,
    pub accepted: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rejection: Option<String>,
    /// Wall time of the embedder call.
    pub seconds: f64,
    pub stages: Vec<StageRecord>,
    pub revenue: f64,
    pub cost: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub objective: Option<f64>,
    /// Relative gap when the solver stopped on its time limit with an incumbent.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gap: Option<f64>,
    /// True when the embedder ran out of time (accepted with a gap, or rejected).
    pub censored: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub search: Option<BipStats>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub embedding: Option<Embedding>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub seconds: f64,
}

impl From<&StageTime> for StageRecord {
    fn from(s: &StageTime) -> Self {
        StageRecord { stage: s.stage.to_string(), seconds: s.seconds }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSeries {
    /// State at every multiple of the sampling interval, plus the end of the run.
    pub samples: Vec<Sample>,
    /// State after every event, for exact replays.
    pub events: Vec<EventRecord>,
    pub requests: Vec<RequestRecord>,
}

impl MetricsSeries {
    pub fn final_sample(&self) -> Option<&Sample> {
        self.samples.last()
    }

    /// Accepted over offered requests; zero when nothing arrived.
    pub fn acceptance_ratio(&self) -> f64 {
        self.final_sample().map_or(0.0, |s| s.acceptance_ratio)
    }

    pub fn mean_request_seconds(&self) -> f64 {
        if self.requests.is_empty() {
            return 0.0;
        }
        self.requests.iter().map(|r| r.seconds).sum::<f64>() / self.requests.len() as f64
    }

    /// Time-weighted mean of the sampled node and link utilization.
    pub fn mean_utilization(&self) -> (f64, f64) {
        let n = self.samples.len().max(1) as f64;
        let node = self.samples.iter().map(|s| s.node_utilization).sum::<f64>() / n;
        let link = self.samples.iter().map(|s| s.link_utilization).sum::<f64>() / n;
        (node, link)
    }
}

/// Everything a run produced, including the generated instance.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub substrate: SubstrateNetwork,
    pub workload: Workload,
    pub metrics: MetricsSeries,
}

/// Generates the substrate and workload of `cfg` and simulates them.
pub fn run(cfg: &SimConfig) -> Result<SimOutput, SimError> {
    if !(cfg.sample_interval > 0.0) {
        return Err(SimError::Config("sample interval must be positive".into()));
    }
    let (substrate, workload) = generate(cfg)?;
    let limit = cfg.time_limit_s.map(Duration::from_secs_f64);
    let embedder = cfg.embedder.build(cfg.iterations, limit, cfg.work_limit);
    let metrics = simulate(substrate.clone(), &workload, embedder.as_ref(), cfg.sample_interval)?;
    Ok(SimOutput { substrate, workload, metrics })
}

/// The instance a config describes: substrate from stream 0 and workload from
/// stream 1 of the seed, so every embedder sees the same requests.
pub fn generate(cfg: &SimConfig) -> Result<(SubstrateNetwork, Workload), SimError> {
    let sn = topogen::gen_waxman(&cfg.substrate, &mut topogen::rng(cfg.seed, 0))?;
    let w = topogen::gen_workload(&cfg.workload, cfg.substrate.hs, &mut topogen::rng(cfg.seed, 1))?;
    Ok((sn, w))
}

struct State {
    arrivals: u64,
    accepted: u64,
    revenue: f64,
    cost: f64,
}

impl State {
    fn sample(&self, time: f64, sn: &SubstrateNetwork) -> Sample {
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        Sample {
            time,
            arrivals: self.arrivals,
            accepted: self.accepted,
            acceptance_ratio: ratio(self.accepted, self.arrivals),
            node_utilization: ratio(sn.used_cpu(), sn.total_cpu()),
            link_utilization: ratio(sn.used_bw(), sn.total_bw()),
            revenue: self.revenue,
            cost: self.cost,
            profit: self.revenue - self.cost,
            live: sn.live_allocations().len(),
        }
    }
}

/// Runs the events of `workload` against `sn` with `embedder`.
pub fn simulate(
    mut sn: SubstrateNetwork,
    workload: &Workload,
    embedder: &dyn Embedder,
    sample_interval: f64,
) -> Result<MetricsSeries, SimError> {
    let by_id: HashMap<RequestId, &VnRequest> = workload.requests.iter().map(|r| (r.id(), r)).collect();
    let mut live: BTreeMap<RequestId, Embedding> = BTreeMap::new();
    let mut st = State { arrivals: 0, accepted: 0, revenue: 0.0, cost: 0.0 };
    let mut samples = Vec::new();
    let mut events = Vec::with_capacity(workload.events.len());
    let mut requests = Vec::with_capacity(workload.requests.len());
    let mut next_sample = 0.0;
    let mut sample_index = 0u64;
    let mut now = 0.0;
    for ev in &workload.events {
        while next_sample < ev.time {
            samples.push(st.sample(next_sample, &sn));
            sample_index += 1;
            next_sample = sample_index as f64 * sample_interval;
        }
        now = ev.time;
        let fail = |message: String| SimError::Invariant { time: ev.time, message };
        let vn = *by_id.get(&ev.request).ok_or_else(|| fail(format!("unknown request {}", ev.request)))?;
        match ev.kind {
            EventKind::Arrival => {
                st.arrivals += 1;
                let before = (sn.residual_cpu_table().to_vec(), sn.residual_bw_table().to_vec());
                let start = Instant::now();
                let attempt = embedder.embed(&sn, vn);
                let seconds = start.elapsed().as_secs_f64();
                let d = &attempt.diagnostics;
                let mut rec = RequestRecord {
                    id: vn.id(),
                    arrival: vn.arrival(),
                    departure: vn.departure(),
                    accepted: false,
                    rejection: None,
                    seconds,
                    stages: d.stages.iter().map(StageRecord::from).collect(),
                    revenue: revenue(vn),
                    cost: 0.0,
                    objective: d.objective,
                    gap: d.gap,
                    censored: d.gap.is_some(),
                    search: d.search,
                    embedding: None,
                };
                match attempt.result {
                    Ok(e) => {
                        sn.allocate(vn, &e).map_err(|err| {
                            fail(format!(
                                "{} produced an unusable embedding for request {}: {err}",
                                embedder.name(),
                                vn.id()
                            ))
                        })?;
                        st.accepted += 1;
                        st.revenue += rec.revenue;
                        rec.cost = cost(vn, &e);
                        st.cost += rec.cost;
                        rec.accepted = true;
                        rec.embedding = Some(e.clone());
                        live.insert(vn.id(), e);
                    }
                    Err(r) => {
                        let after = (sn.residual_cpu_table(), sn.residual_bw_table());
                        if before.0 != after.0 || before.1 != after.1 {
                            return Err(fail(format!("rejecting request {} changed the residuals", vn.id())));
                        }
                        rec.censored |= matches!(r, crate::embed::Rejection::TimeLimit { .. });
                        rec.rejection = Some(r.to_string());
                    }
                }
                requests.push(rec);
            }
            EventKind::Departure => {
                if let Some(e) = live.remove(&vn.id()) {
                    sn.release(vn, &e).map_err(|err| fail(err.to_string()))?;
                }
            }
        }
        check_conservation(&sn).map_err(fail)?;
        events.push(EventRecord { kind: ev.kind, request: ev.request, state: st.sample(now, &sn) });
    }
    samples.push(st.sample(now, &sn));
    if live.is_empty() && (sn.used_cpu() != 0 || sn.used_bw() != 0) {
        return Err(SimError::Invariant {
            time: now,
            message: "residuals not restored after the last departure".into(),
        });
    }
    Ok(MetricsSeries { samples, events, requests })
}

/// Every resource's used capacity equals the sum of the live loads placed on it.
pub fn check_conservation(sn: &SubstrateNetwork) -> Result<(), String> {
    let mut cpu = vec![0u64; sn.node_count()];
    let mut bw = vec![0u64; sn.link_count()];
    for load in sn.live_allocations().values() {
        for (&u, &c) in &load.cpu {
            cpu[u] += c as u64;
        }
        for (&l, &b) in &load.bw {
            bw[l] += b as u64;
        }
    }
    for (u, n) in sn.nodes().iter().enumerate() {
        if (n.cpu - sn.residual_cpu(u)) as u64 != cpu[u] {
            return Err(format!("node {u}: used cpu disagrees with live allocations"));
        }
    }
    for (l, link) in sn.links().iter().enumerate() {
        if (link.bw - sn.residual_bw(l)) as u64 != bw[l] {
            return Err(format!("link {l}: used bandwidth disagrees with live allocations"));
        }
    }
    Ok(())
}
