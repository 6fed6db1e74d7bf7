//! The path-based master program over a restricted pool, its explicit dual, and
//! decoding of integral solutions.
//!
//! Rows keep the scaling of the flow formulation: with `f_p = D_ij * y_p`, the
//! demand, capacity and coupling rows are written in terms of `D_ij * y_p`, so
//! their duals are exactly the prices of the flow formulation's dual.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use serde::Serialize;
use thiserror::Error;

use crate::embed::Rejection;
use crate::milp::{
    solve_bip_with_stats, solve_lp_with, BipOptions, BipStats, ConId, LpOptions, Model, Relation, Sense, SolverError,
    Status, VarId,
};
use crate::model::{embedding_objective, AugmentedNetwork, Embedding, LinkId, MetaLink, NodeId, SubstratePath};

/// A path in the augmented network: meta-link `(i, u)`, a substrate path `u -> v`,
/// and meta-link `(j, v)`, for virtual link `(i, j)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct AugPath {
    pub virtual_link: usize,
    pub path: SubstratePath,
}

impl AugPath {
    pub fn entry(&self, aug: &AugmentedNetwork) -> MetaLink {
        MetaLink { virtual_node: aug.vn.links()[self.virtual_link].i, substrate_node: self.path.source() }
    }

    pub fn exit(&self, aug: &AugmentedNetwork) -> MetaLink {
        MetaLink { virtual_node: aug.vn.links()[self.virtual_link].j, substrate_node: self.path.target() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("virtual link {virtual_link} has no path in the pool")]
pub struct MissingPaths {
    pub virtual_link: usize,
}

/// Row handles of the master program.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalRows {
    /// Each virtual node is mapped exactly once.
    pub assign: Vec<ConId>,
    /// Each substrate node hosts at most one virtual node; only nodes that are candidates.
    pub host_once: Vec<(NodeId, ConId)>,
    /// Each virtual link carries its demand.
    pub demand: Vec<ConId>,
    /// Capacity of every substrate link used by some pool path.
    pub capacity: Vec<(LinkId, ConId)>,
    /// Per pool path: flow only if the entry meta-link is used.
    pub entry: Vec<ConId>,
    /// Per pool path: flow only if the exit meta-link is used.
    pub exit: Vec<ConId>,
}

#[derive(Debug, Clone)]
pub struct PrimalModel {
    pub model: Model,
    /// `y_p` per pool path, in pool order.
    pub path_vars: Vec<VarId>,
    /// `chi_u^i` per virtual node, in candidate order.
    pub chi: Vec<Vec<(NodeId, VarId)>>,
    pub rows: PrimalRows,
}

pub fn build_primal(aug: &AugmentedNetwork, pool: &[AugPath]) -> Result<PrimalModel, MissingPaths> {
    let sn = aug.base;
    let vn = aug.vn;
    let mut by_link = vec![Vec::new(); vn.links().len()];
    for (k, p) in pool.iter().enumerate() {
        by_link[p.virtual_link].push(k);
    }
    if let Some(virtual_link) = by_link.iter().position(Vec::is_empty) {
        return Err(MissingPaths { virtual_link });
    }

    let mut m = Model::new(Sense::Minimize);
    let path_vars: Vec<VarId> = pool
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let d = vn.links()[p.virtual_link].bw as f64;
            let inv: f64 = p.path.links().iter().map(|&l| 1.0 / sn.residual_bw(l) as f64).sum();
            m.add_binary(format!("y{k}_l{}", p.virtual_link), d * inv)
        })
        .collect();
    let chi: Vec<Vec<(NodeId, VarId)>> = (0..vn.nodes().len())
        .map(|i| {
            aug.candidates(i)
                .iter()
                .map(|&u| (u, m.add_binary(format!("chi_{i}_{u}"), 1.0 / sn.residual_cpu(u) as f64)))
                .collect()
        })
        .collect();
    let chi_var = |ml: MetaLink| {
        chi[ml.virtual_node]
            .iter()
            .find(|(u, _)| *u == ml.substrate_node)
            .map(|&(_, v)| v)
            .expect("pool paths start and end at candidates")
    };

    let assign = chi
        .iter()
        .enumerate()
        .map(|(i, c)| {
            m.add_constraint(format!("assign_{i}"), c.iter().map(|&(_, v)| (v, 1.0)).collect(), Relation::Eq, 1.0)
        })
        .collect();
    let mut hosts: BTreeMap<NodeId, Vec<(VarId, f64)>> = BTreeMap::new();
    for c in &chi {
        for &(u, v) in c {
            hosts.entry(u).or_default().push((v, 1.0));
        }
    }
    let host_once = hosts
        .into_iter()
        .map(|(u, terms)| (u, m.add_constraint(format!("host_{u}"), terms, Relation::Le, 1.0)))
        .collect();
    let demand = by_link
        .iter()
        .enumerate()
        .map(|(k, paths)| {
            let d = vn.links()[k].bw as f64;
            m.add_constraint(format!("demand_{k}"), paths.iter().map(|&p| (path_vars[p], d)).collect(), Relation::Eq, d)
        })
        .collect();
    let mut uses: BTreeMap<LinkId, Vec<(VarId, f64)>> = BTreeMap::new();
    for (k, p) in pool.iter().enumerate() {
        let d = vn.links()[p.virtual_link].bw as f64;
        for &l in p.path.links() {
            uses.entry(l).or_default().push((path_vars[k], d));
        }
    }
    let capacity = uses
        .into_iter()
        .map(|(l, terms)| (l, m.add_constraint(format!("cap_{l}"), terms, Relation::Le, sn.residual_bw(l) as f64)))
        .collect();
    let mut entry = Vec::with_capacity(pool.len());
    let mut exit = Vec::with_capacity(pool.len());
    for (k, p) in pool.iter().enumerate() {
        let d = vn.links()[p.virtual_link].bw as f64;
        for (ml, rows, tag) in [(p.entry(aug), &mut entry, "in"), (p.exit(aug), &mut exit, "out")] {
            rows.push(m.add_constraint(
                format!("{tag}_{k}"),
                vec![(path_vars[k], d), (chi_var(ml), -d)],
                Relation::Le,
                0.0,
            ));
        }
    }
    Ok(PrimalModel { model: m, path_vars, chi, rows: PrimalRows { assign, host_once, demand, capacity, entry, exit } })
}

/// The master program's continuous relaxation with the implied upper bounds
/// dropped, matching the variable domains of the dual.
pub fn relaxation(pm: &PrimalModel) -> Model {
    let mut m = pm.model.relaxed();
    m.variables.iter_mut().for_each(|v| v.upper = f64::INFINITY);
    m
}

/// Outcome of solving the master program to integrality.
#[derive(Debug, Clone)]
pub struct MasterSolution {
    pub embedding: Embedding,
    /// Relative optimality gap if the solver stopped on its time limit.
    pub gap: Option<f64>,
    pub search: BipStats,
}

pub fn solve_restricted_primal(
    pm: &PrimalModel,
    aug: &AugmentedNetwork,
    pool: &[AugPath],
    time_limit: Option<Duration>,
) -> Result<MasterSolution, Rejection> {
    solve_restricted_primal_from(pm, aug, pool, None, BipOptions::with_time_limit(time_limit))
}

/// Solves the master to integrality within the limits of `opts`, seeding the
/// search with `start` when it is expressible in the pool. The solve runs on
/// [`tightened`] with node-mapping variables branched first.
pub fn solve_restricted_primal_from(
    pm: &PrimalModel,
    aug: &AugmentedNetwork,
    pool: &[AugPath],
    start: Option<&Embedding>,
    opts: BipOptions,
) -> Result<MasterSolution, Rejection> {
    let model = tightened(pm, aug, pool);
    let mut priority = vec![0; model.var_count()];
    for &(_, v) in pm.chi.iter().flatten() {
        priority[v.0] = 1;
    }
    let opts = BipOptions { incumbent: start.and_then(|e| encode(pm, pool, e)), priority, ..opts };
    let (solved, stats) = solve_bip_with_stats(&model, &opts);
    let (values, gap) = match solved {
        Ok(s) if s.status == Status::Optimal => (s.values, None),
        Ok(_) => return Err(Rejection::Infeasible),
        Err(SolverError::TimeLimit { incumbent: Some(s), gap, .. }) => (s.values, Some(gap)),
        Err(SolverError::TimeLimit { incumbent: None, .. }) => {
            return Err(Rejection::TimeLimit { stage: "restricted primal".into() })
        }
        Err(e) => return Err(Rejection::Solver(e.to_string())),
    };
    Ok(MasterSolution { embedding: decode(pm, aug, pool, &values), gap, search: stats })
}

/// The master with its per-path coupling rows summed per virtual link and
/// meta-link: `sum_p D y_p <= D chi` over the paths of one virtual link entering
/// (or leaving) through the same meta-link. Since the demand rows select exactly
/// one path per virtual link, both forms have the same integral points; this one
/// has a tighter relaxation and far fewer rows.
pub fn tightened(pm: &PrimalModel, aug: &AugmentedNetwork, pool: &[AugPath]) -> Model {
    let per_path: BTreeSet<ConId> = pm.rows.entry.iter().chain(&pm.rows.exit).copied().collect();
    let mut m = Model::new(pm.model.sense);
    m.variables = pm.model.variables.clone();
    m.constraints = pm
        .model
        .constraints
        .iter()
        .enumerate()
        .filter(|(k, _)| !per_path.contains(&ConId(*k)))
        .map(|(_, c)| c.clone())
        .collect();
    let chi_var =
        |ml: MetaLink| pm.chi[ml.virtual_node].iter().find(|(u, _)| *u == ml.substrate_node).expect("candidate").1;
    let mut groups: BTreeMap<(usize, bool, MetaLink), Vec<(VarId, f64)>> = BTreeMap::new();
    for (k, p) in pool.iter().enumerate() {
        let d = aug.vn.links()[p.virtual_link].bw as f64;
        groups.entry((p.virtual_link, false, p.entry(aug))).or_default().push((pm.path_vars[k], d));
        groups.entry((p.virtual_link, true, p.exit(aug))).or_default().push((pm.path_vars[k], d));
    }
    for ((k, out, ml), mut terms) in groups {
        let d = aug.vn.links()[k].bw as f64;
        terms.push((chi_var(ml), -d));
        let tag = if out { "out" } else { "in" };
        m.add_constraint(format!("{tag}_{k}_{}_{}", ml.virtual_node, ml.substrate_node), terms, Relation::Le, 0.0);
    }
    m
}

/// Variable values of `e` in the master, if every one of its paths is in the pool.
fn encode(pm: &PrimalModel, pool: &[AugPath], e: &Embedding) -> Option<Vec<f64>> {
    let mut x = vec![0.0; pm.model.var_count()];
    for (i, &u) in e.node_map.iter().enumerate() {
        x[pm.chi.get(i)?.iter().find(|c| c.0 == u)?.1 .0] = 1.0;
    }
    for (k, path) in e.link_map.iter().enumerate() {
        let p = pool.iter().position(|p| p.virtual_link == k && &p.path == path)?;
        x[pm.path_vars[p].0] = 1.0;
    }
    Some(x)
}

/// Reads the node map from the `chi` values and one path per virtual link from the `y` values.
pub fn decode(pm: &PrimalModel, aug: &AugmentedNetwork, pool: &[AugPath], values: &[f64]) -> Embedding {
    let node_map: Vec<NodeId> =
        pm.chi.iter().map(|c| c.iter().find(|(_, v)| values[v.0] > 0.5).expect("integral assignment").0).collect();
    let mut link_map: Vec<Option<SubstratePath>> = vec![None; aug.vn.links().len()];
    for (k, p) in pool.iter().enumerate() {
        if values[pm.path_vars[k].0] > 0.5 {
            let slot = &mut link_map[p.virtual_link];
            assert!(slot.is_none(), "demand rows select one path per virtual link");
            *slot = Some(p.path.clone());
        }
    }
    let link_map: Vec<SubstratePath> = link_map.into_iter().map(|p| p.expect("every virtual link is routed")).collect();
    let objective = embedding_objective(aug.base, aug.vn, &node_map, &link_map);
    Embedding { node_map, link_map, objective }
}

/// Dual prices of the restricted master's relaxation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualPrices {
    /// Per virtual node (assignment rows).
    pub lambda: Vec<f64>,
    /// Per virtual link (demand rows).
    pub mu: Vec<f64>,
    /// Per substrate node (host rows); zero for nodes without a row.
    pub eta: Vec<f64>,
    /// Per substrate link (capacity rows); zero for links without a row.
    pub gamma: Vec<f64>,
    /// Per pool path: entry and exit coupling duals.
    pub sigma_path: Vec<f64>,
    pub tau_path: Vec<f64>,
    /// Coupling duals summed over the pool paths entering through each meta-link.
    pub sigma: BTreeMap<MetaLink, f64>,
    /// Coupling duals summed over the pool paths leaving through each meta-link.
    pub tau: BTreeMap<MetaLink, f64>,
    pub objective: f64,
}

impl DualPrices {
    pub fn sigma_of(&self, m: MetaLink) -> f64 {
        self.sigma.get(&m).copied().unwrap_or(0.0)
    }

    pub fn tau_of(&self, m: MetaLink) -> f64 {
        self.tau.get(&m).copied().unwrap_or(0.0)
    }

    fn aggregate(&mut self, aug: &AugmentedNetwork, pool: &[AugPath]) {
        self.sigma.clear();
        self.tau.clear();
        for (k, p) in pool.iter().enumerate() {
            *self.sigma.entry(p.entry(aug)).or_default() += self.sigma_path[k];
            *self.tau.entry(p.exit(aug)).or_default() += self.tau_path[k];
        }
    }
}

/// Variable handles of the explicit dual program.
#[derive(Debug, Clone)]
pub struct DualModel {
    pub model: Model,
    pub lambda: Vec<VarId>,
    pub mu: Vec<VarId>,
    pub eta: Vec<(NodeId, VarId)>,
    pub gamma: Vec<(LinkId, VarId)>,
    pub sigma: Vec<VarId>,
    pub tau: Vec<VarId>,
}

/// The dual of the master relaxation, written out variable by variable: one free
/// variable per equality row, one non-negative price per `<=` row, one constraint
/// per `chi` and per path column.
pub fn build_dual(aug: &AugmentedNetwork, pool: &[AugPath], pm: &PrimalModel) -> DualModel {
    let sn = aug.base;
    let vn = aug.vn;
    let mut m = Model::new(Sense::Maximize);
    let free = (f64::NEG_INFINITY, f64::INFINITY);
    let lambda: Vec<VarId> =
        (0..vn.nodes().len()).map(|i| m.add_var(format!("lambda_{i}"), free.0, free.1, 1.0, false)).collect();
    let mu: Vec<VarId> = vn
        .links()
        .iter()
        .enumerate()
        .map(|(k, l)| m.add_var(format!("mu_{k}"), free.0, free.1, l.bw as f64, false))
        .collect();
    let eta: Vec<(NodeId, VarId)> = pm
        .rows
        .host_once
        .iter()
        .map(|&(u, _)| (u, m.add_var(format!("eta_{u}"), 0.0, f64::INFINITY, -1.0, false)))
        .collect();
    let gamma: Vec<(LinkId, VarId)> = pm
        .rows
        .capacity
        .iter()
        .map(|&(l, _)| {
            let a = sn.residual_bw(l) as f64;
            (l, m.add_var(format!("gamma_{l}"), 0.0, f64::INFINITY, -a, false))
        })
        .collect();
    let sigma: Vec<VarId> =
        (0..pool.len()).map(|k| m.add_var(format!("sigma_{k}"), 0.0, f64::INFINITY, 0.0, false)).collect();
    let tau: Vec<VarId> =
        (0..pool.len()).map(|k| m.add_var(format!("tau_{k}"), 0.0, f64::INFINITY, 0.0, false)).collect();

    let eta_of: BTreeMap<NodeId, VarId> = eta.iter().copied().collect();
    let gamma_of: BTreeMap<LinkId, VarId> = gamma.iter().copied().collect();
    // chi columns: lambda_i - eta_u + sum D sigma_p (paths entering at (i,u))
    //              + sum D tau_p (paths leaving at (i,u)) <= 1 / A_u
    for (i, cands) in pm.chi.iter().enumerate() {
        for &(u, _) in cands {
            let here = MetaLink { virtual_node: i, substrate_node: u };
            let mut terms = vec![(lambda[i], 1.0), (eta_of[&u], -1.0)];
            for (k, p) in pool.iter().enumerate() {
                let d = vn.links()[p.virtual_link].bw as f64;
                if p.entry(aug) == here {
                    terms.push((sigma[k], d));
                }
                if p.exit(aug) == here {
                    terms.push((tau[k], d));
                }
            }
            m.add_constraint(format!("chi_{i}_{u}"), terms, Relation::Le, 1.0 / sn.residual_cpu(u) as f64);
        }
    }
    // path columns: mu_ij - sum gamma - sigma_p - tau_p <= sum 1 / A_l
    for (k, p) in pool.iter().enumerate() {
        let mut terms = vec![(mu[p.virtual_link], 1.0), (sigma[k], -1.0), (tau[k], -1.0)];
        terms.extend(p.path.links().iter().map(|l| (gamma_of[l], -1.0)));
        let rhs: f64 = p.path.links().iter().map(|&l| 1.0 / sn.residual_bw(l) as f64).sum();
        m.add_constraint(format!("path_{k}"), terms, Relation::Le, rhs);
    }
    DualModel { model: m, lambda, mu, eta, gamma, sigma, tau }
}

fn lp_failure(e: SolverError, stage: &str) -> Rejection {
    match e {
        SolverError::TimeLimit { .. } => Rejection::TimeLimit { stage: stage.into() },
        e => Rejection::Solver(e.to_string()),
    }
}

/// Solves the explicit dual and maps its values into [`DualPrices`].
pub fn solve_dual(
    aug: &AugmentedNetwork,
    pool: &[AugPath],
    pm: &PrimalModel,
    time_limit: Option<Duration>,
) -> Result<DualPrices, Rejection> {
    let dm = build_dual(aug, pool, pm);
    let s = solve_lp_with(&dm.model, &LpOptions { time_limit }).map_err(|e| lp_failure(e, "dual"))?;
    match s.status {
        Status::Optimal => {}
        // An unbounded dual means the restricted relaxation is infeasible.
        Status::Unbounded | Status::Infeasible => return Err(Rejection::Infeasible),
    }
    let (n, l) = (aug.base.node_count(), aug.base.link_count());
    let mut prices = DualPrices {
        lambda: dm.lambda.iter().map(|&v| s.value(v)).collect(),
        mu: dm.mu.iter().map(|&v| s.value(v)).collect(),
        eta: vec![0.0; n],
        gamma: vec![0.0; l],
        sigma_path: dm.sigma.iter().map(|&v| s.value(v)).collect(),
        tau_path: dm.tau.iter().map(|&v| s.value(v)).collect(),
        sigma: BTreeMap::new(),
        tau: BTreeMap::new(),
        objective: s.objective,
    };
    for &(u, v) in &dm.eta {
        prices.eta[u] = s.value(v);
    }
    for &(k, v) in &dm.gamma {
        prices.gamma[k] = s.value(v);
    }
    prices.aggregate(aug, pool);
    Ok(prices)
}

/// Prices read off the row duals of the relaxed master, using the same sign
/// conventions as [`solve_dual`]. Returned with the relaxation's objective.
pub fn duals_from_primal(
    aug: &AugmentedNetwork,
    pool: &[AugPath],
    pm: &PrimalModel,
    time_limit: Option<Duration>,
) -> Result<DualPrices, Rejection> {
    let relaxed = relaxation(pm);
    let s = solve_lp_with(&relaxed, &LpOptions { time_limit }).map_err(|e| lp_failure(e, "relaxation"))?;
    if s.status != Status::Optimal {
        return Err(Rejection::Infeasible);
    }
    let r = &pm.rows;
    let mut prices = DualPrices {
        lambda: r.assign.iter().map(|&c| s.dual(c)).collect(),
        mu: r.demand.iter().map(|&c| s.dual(c)).collect(),
        eta: vec![0.0; aug.base.node_count()],
        gamma: vec![0.0; aug.base.link_count()],
        sigma_path: r.entry.iter().map(|&c| -s.dual(c)).collect(),
        tau_path: r.exit.iter().map(|&c| -s.dual(c)).collect(),
        sigma: BTreeMap::new(),
        tau: BTreeMap::new(),
        objective: s.objective,
    };
    for &(u, c) in &r.host_once {
        prices.eta[u] = -s.dual(c);
    }
    for &(l, c) in &r.capacity {
        prices.gamma[l] = -s.dual(c);
    }
    prices.aggregate(aug, pool);
    Ok(prices)
}

/// Dual objective and largest constraint violation of `prices` in the explicit dual.
pub fn dual_feasibility(aug: &AugmentedNetwork, pool: &[AugPath], pm: &PrimalModel, prices: &DualPrices) -> (f64, f64) {
    let dm = build_dual(aug, pool, pm);
    let mut x = vec![0.0; dm.model.var_count()];
    for (i, v) in dm.lambda.iter().enumerate() {
        x[v.0] = prices.lambda[i];
    }
    for (k, v) in dm.mu.iter().enumerate() {
        x[v.0] = prices.mu[k];
    }
    for &(u, v) in &dm.eta {
        x[v.0] = prices.eta[u];
    }
    for &(l, v) in &dm.gamma {
        x[v.0] = prices.gamma[l];
    }
    for (k, v) in dm.sigma.iter().enumerate() {
        x[v.0] = prices.sigma_path[k];
    }
    for (k, v) in dm.tau.iter().enumerate() {
        x[v.0] = prices.tau_path[k];
    }
    let mut worst = 0.0f64;
    for (v, &val) in dm.model.variables.iter().zip(&x) {
        worst = worst.max(v.lower - val).max(val - v.upper);
    }
    for c in &dm.model.constraints {
        let lhs: f64 = c.terms.iter().map(|&(v, a)| a * x[v.0]).sum();
        worst = worst.max(lhs - c.rhs);
    }
    (dm.model.evaluate(&x), worst)
}

/// Substrate nodes and links that appear in the master's rows.
pub fn row_support(pm: &PrimalModel) -> (BTreeSet<NodeId>, BTreeSet<LinkId>) {
    (pm.rows.host_once.iter().map(|r| r.0).collect(), pm.rows.capacity.iter().map(|r| r.0).collect())
}
