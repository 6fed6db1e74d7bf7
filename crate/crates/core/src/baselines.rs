//! Reference embedders: the exact link-flow program and a greedy
//! node-then-shortest-path heuristic.

use std::collections::BTreeMap;
use std::time::Duration;

use crate::embed::{Attempt, Diagnostics, Embedder, Rejection};
use crate::milp::{solve_bip_with_stats, BipOptions, ConId, Model, Relation, Sense, SolverError, Status, VarId};
use crate::model::{
    build_augmented, embedding_objective, AugmentedNetwork, Embedding, LinkId, NodeId, SubstrateNetwork, SubstratePath,
    VnRequest,
};
use crate::pathgen::dijkstra::dijkstra_with_residuals;

/// Variable and row handles of the link-flow program.
#[derive(Debug, Clone)]
pub struct LinkFlowModel {
    pub model: Model,
    /// `chi_u^i` per virtual node, in candidate order.
    pub chi: Vec<Vec<(NodeId, VarId)>>,
    /// Per virtual link: directed substrate arcs `(from, to, link, var)`.
    pub arcs: Vec<Vec<(NodeId, NodeId, LinkId, VarId)>>,
    /// Per virtual link: meta-arcs from the source virtual node into each candidate.
    pub sources: Vec<Vec<(NodeId, VarId)>>,
    /// Per virtual link: meta-arcs from each candidate into the target virtual node.
    pub sinks: Vec<Vec<(NodeId, VarId)>>,
    pub capacity: Vec<(LinkId, ConId)>,
}

/// Builds the link-flow program on the augmented network.
///
/// Flow variables exist only on arcs whose residual can carry the virtual link's
/// demand, and on the meta-links of that link's own endpoints. Meta-links carry no
/// objective term and no capacity row; the coupling rows already gate them.
pub fn build_link_flow(aug: &AugmentedNetwork) -> LinkFlowModel {
    let sn = aug.base;
    let vn = aug.vn;
    let mut m = Model::new(Sense::Minimize);
    let chi: Vec<Vec<(NodeId, VarId)>> = (0..vn.nodes().len())
        .map(|i| {
            aug.candidates(i)
                .iter()
                .map(|&u| (u, m.add_binary(format!("chi_{i}_{u}"), 1.0 / sn.residual_cpu(u) as f64)))
                .collect()
        })
        .collect();
    let mut arcs = Vec::with_capacity(vn.links().len());
    let mut sources: Vec<Vec<(NodeId, VarId)>> = Vec::with_capacity(vn.links().len());
    let mut sinks: Vec<Vec<(NodeId, VarId)>> = Vec::with_capacity(vn.links().len());
    for (k, vl) in vn.links().iter().enumerate() {
        let d = vl.bw as f64;
        let mut ka = Vec::new();
        for (l, link) in sn.links().iter().enumerate() {
            let a = sn.residual_bw(l);
            if a < vl.bw {
                continue;
            }
            for (from, to) in [(link.u, link.v), (link.v, link.u)] {
                ka.push((from, to, l, m.add_binary(format!("f{k}_{from}_{to}"), d / a as f64)));
            }
        }
        arcs.push(ka);
        sources.push(aug.candidates(vl.i).iter().map(|&u| (u, m.add_binary(format!("s{k}_{u}"), 0.0))).collect());
        sinks.push(aug.candidates(vl.j).iter().map(|&v| (v, m.add_binary(format!("t{k}_{v}"), 0.0))).collect());
    }

    for (i, row) in chi.iter().enumerate() {
        m.add_constraint(format!("assign_{i}"), row.iter().map(|&(_, v)| (v, 1.0)).collect(), Relation::Eq, 1.0);
    }
    let mut hosts: BTreeMap<NodeId, Vec<(VarId, f64)>> = BTreeMap::new();
    for row in &chi {
        for &(u, v) in row {
            hosts.entry(u).or_default().push((v, 1.0));
        }
    }
    for (u, terms) in hosts {
        m.add_constraint(format!("host_{u}"), terms, Relation::Le, 1.0);
    }
    let chi_of = |i: usize, u: NodeId| chi[i].iter().find(|c| c.0 == u).map(|c| c.1).expect("candidate");
    let mut uses: BTreeMap<LinkId, Vec<(VarId, f64)>> = BTreeMap::new();
    for (k, vl) in vn.links().iter().enumerate() {
        let d = vl.bw as f64;
        for &(u, s) in &sources[k] {
            m.add_constraint(format!("in_{k}_{u}"), vec![(s, d), (chi_of(vl.i, u), -d)], Relation::Le, 0.0);
        }
        for &(v, t) in &sinks[k] {
            m.add_constraint(format!("out_{k}_{v}"), vec![(t, d), (chi_of(vl.j, v), -d)], Relation::Le, 0.0);
        }
        m.add_constraint(format!("source_{k}"), sources[k].iter().map(|&(_, s)| (s, d)).collect(), Relation::Eq, d);
        m.add_constraint(format!("sink_{k}"), sinks[k].iter().map(|&(_, t)| (t, d)).collect(), Relation::Eq, d);
        // Conservation at every substrate node: inflow minus outflow is zero.
        let mut balance: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); sn.node_count()];
        for &(from, to, l, f) in &arcs[k] {
            balance[to].push((f, d));
            balance[from].push((f, -d));
            uses.entry(l).or_default().push((f, d));
        }
        for &(u, s) in &sources[k] {
            balance[u].push((s, d));
        }
        for &(v, t) in &sinks[k] {
            balance[v].push((t, -d));
        }
        for (w, terms) in balance.into_iter().enumerate() {
            if !terms.is_empty() {
                m.add_constraint(format!("flow_{k}_{w}"), terms, Relation::Eq, 0.0);
            }
        }
    }
    let capacity = uses
        .into_iter()
        .map(|(l, terms)| (l, m.add_constraint(format!("cap_{l}"), terms, Relation::Le, sn.residual_bw(l) as f64)))
        .collect();
    LinkFlowModel { model: m, chi, arcs, sources, sinks, capacity }
}

/// Turns integral flows into one simple path per virtual link by walking the
/// positive arcs from the source host and erasing any loop.
pub fn decode_link_flow(lf: &LinkFlowModel, aug: &AugmentedNetwork, values: &[f64]) -> Embedding {
    let on = |v: VarId| values[v.0] > 0.5;
    let node_map: Vec<NodeId> =
        lf.chi.iter().map(|row| row.iter().find(|c| on(c.1)).expect("integral assignment").0).collect();
    let mut link_map = Vec::with_capacity(aug.vn.links().len());
    for (k, vl) in aug.vn.links().iter().enumerate() {
        let start = lf.sources[k].iter().find(|s| on(s.1)).expect("one source arc").0;
        let end = lf.sinks[k].iter().find(|t| on(t.1)).expect("one sink arc").0;
        assert_eq!((start, end), (node_map[vl.i], node_map[vl.j]), "meta-arcs follow the node map");
        let mut next: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for &(from, to, _, f) in &lf.arcs[k] {
            if on(f) {
                next.entry(from).or_default().push(to);
            }
        }
        let mut walk = vec![start];
        let mut cur = start;
        while cur != end {
            let succ = next.get_mut(&cur).and_then(Vec::pop).expect("flow conservation");
            if let Some(pos) = walk.iter().position(|&n| n == succ) {
                walk.truncate(pos + 1);
            } else {
                walk.push(succ);
            }
            cur = succ;
        }
        link_map.push(aug.base.path_from_nodes(walk).expect("walk uses existing links"));
    }
    let objective = embedding_objective(aug.base, aug.vn, &node_map, &link_map);
    Embedding { node_map, link_map, objective }
}

/// Node mapping first, then the meta-arcs that pick path ends, then link flows.
fn branch_priority(lf: &LinkFlowModel) -> Vec<u32> {
    let mut p = vec![0; lf.model.var_count()];
    for &(_, v) in lf.chi.iter().flatten() {
        p[v.0] = 2;
    }
    for &(_, v) in lf.sources.iter().chain(&lf.sinks).flatten() {
        p[v.0] = 1;
    }
    p
}

/// Exact link-flow embedder.
#[derive(Debug, Clone, Default)]
pub struct VineOpt {
    pub time_limit: Option<Duration>,
    /// Simplex iterations allowed to the branch-and-bound search.
    pub work_limit: Option<usize>,
}

impl Embedder for VineOpt {
    fn name(&self) -> &'static str {
        "vineopt"
    }

    fn embed(&self, sn: &SubstrateNetwork, vn: &VnRequest) -> Attempt {
        vine_opt_with(sn, vn, self.time_limit, self.work_limit)
    }
}

pub fn vine_opt(sn: &SubstrateNetwork, vn: &VnRequest, time_limit: Option<Duration>) -> Attempt {
    vine_opt_with(sn, vn, time_limit, None)
}

pub fn vine_opt_with(
    sn: &SubstrateNetwork,
    vn: &VnRequest,
    time_limit: Option<Duration>,
    work_limit: Option<usize>,
) -> Attempt {
    let mut diag = Diagnostics::default();
    let result = (|| {
        let aug = diag.time("augment", || build_augmented(sn, vn))?;
        let lf = diag.time("build", || build_link_flow(&aug));
        let opts = BipOptions { time_limit, work_limit, incumbent: None, priority: branch_priority(&lf) };
        let (solved, stats) = diag.time("solve", || solve_bip_with_stats(&lf.model, &opts));
        diag.search = Some(stats);
        let values = match solved {
            Ok(s) if s.status == Status::Optimal => s.values,
            Ok(_) => return Err(Rejection::Infeasible),
            Err(SolverError::TimeLimit { incumbent: Some(s), gap, .. }) => {
                diag.gap = Some(gap);
                s.values
            }
            Err(SolverError::TimeLimit { incumbent: None, .. }) => {
                return Err(Rejection::TimeLimit { stage: "link-flow program".into() })
            }
            Err(e) => return Err(Rejection::Solver(e.to_string())),
        };
        Ok(decode_link_flow(&lf, &aug, &values))
    })();
    if let Ok(e) = &result {
        diag.objective = Some(e.objective);
    }
    Attempt { result, diagnostics: diag }
}

/// Greedy host ranking: residual CPU times the residual bandwidth of incident links.
pub fn host_rank(sn: &SubstrateNetwork, u: NodeId) -> u64 {
    let bw: u64 = sn.neighbors(u).iter().map(|&(_, l)| sn.residual_bw(l) as u64).sum();
    sn.residual_cpu(u) as u64 * bw
}

/// Greedy node mapping followed by hop-count shortest paths.
#[derive(Debug, Clone, Copy, Default)]
pub struct Gnmsp;

impl Embedder for Gnmsp {
    fn name(&self) -> &'static str {
        "gnmsp"
    }

    fn embed(&self, sn: &SubstrateNetwork, vn: &VnRequest) -> Attempt {
        gnmsp(sn, vn)
    }
}

/// Virtual nodes in decreasing CPU demand take the best-ranked unused candidate;
/// virtual links in decreasing bandwidth demand take a fewest-hop path over the
/// residuals left by the links routed before them.
pub fn gnmsp(sn: &SubstrateNetwork, vn: &VnRequest) -> Attempt {
    let mut diag = Diagnostics::default();
    let result = diag.time("greedy", || {
        let aug = build_augmented(sn, vn)?;
        let mut order: Vec<usize> = (0..vn.nodes().len()).collect();
        order.sort_by(|&a, &b| vn.nodes()[b].cpu.cmp(&vn.nodes()[a].cpu).then(a.cmp(&b)));
        let mut used = vec![false; sn.node_count()];
        let mut node_map = vec![0; vn.nodes().len()];
        for i in order {
            let best = aug
                .candidates(i)
                .iter()
                .copied()
                .filter(|&u| !used[u])
                .max_by(|&a, &b| host_rank(sn, a).cmp(&host_rank(sn, b)).then(b.cmp(&a)))
                .ok_or(Rejection::NodeMapInfeasible)?;
            used[best] = true;
            node_map[i] = best;
        }
        let mut links: Vec<usize> = (0..vn.links().len()).collect();
        links.sort_by(|&a, &b| vn.links()[b].bw.cmp(&vn.links()[a].bw).then(a.cmp(&b)));
        let mut residual = sn.residual_bw_table().to_vec();
        let hops = vec![1.0; sn.link_count()];
        let mut link_map: Vec<Option<SubstratePath>> = vec![None; vn.links().len()];
        for k in links {
            let vl = vn.links()[k];
            let (path, _) = dijkstra_with_residuals(sn, &residual, node_map[vl.i], node_map[vl.j], vl.bw, &hops)
                .ok_or(Rejection::NoPath { virtual_link: k })?;
            for &l in path.links() {
                residual[l] -= vl.bw;
            }
            link_map[k] = Some(path);
        }
        let link_map: Vec<SubstratePath> = link_map.into_iter().map(Option::unwrap).collect();
        let objective = embedding_objective(sn, vn, &node_map, &link_map);
        Ok(Embedding { node_map, link_map, objective })
    });
    if let Ok(e) = &result {
        diag.objective = Some(e.objective);
    }
    Attempt { result, diagnostics: diag }
}
