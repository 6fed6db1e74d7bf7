//! Initial pool: weighted node mapping followed by one capacitated shortest path
//! per virtual link.

use std::time::Duration;

use super::dijkstra::{dijkstra_with_residuals, inverse_residual_costs};
use super::master::AugPath;
use super::weights::NodeWeights;
use crate::embed::Rejection;
use crate::milp::{solve_bip, BipOptions, Model, Relation, Sense, SolverError, Status, VarId};
use crate::model::{AugmentedNetwork, NodeId};

/// Cost used for a linkless virtual node on a host whose links are all saturated:
/// finite so the node can still be placed, but never preferred.
const SATURATED_HOST_RATIO: f64 = 1e9;

/// Node-mapping program: minimize `sum (W_i / W_u) chi_u^i` with every virtual node
/// mapped once and every substrate node used at most once.
pub fn lp_n_model(aug: &AugmentedNetwork, w: &NodeWeights) -> (Model, Vec<Vec<(NodeId, VarId)>>) {
    let mut m = Model::new(Sense::Minimize);
    let mut vars = Vec::with_capacity(aug.vn.nodes().len());
    for i in 0..aug.vn.nodes().len() {
        let linkless = aug.vn.incident_links(i).is_empty();
        let mut row = Vec::new();
        for &u in aug.candidates(i) {
            let wu = w.w_substrate[u];
            let ratio = if wu > 0.0 {
                w.w_virtual[i] / wu
            } else if linkless {
                SATURATED_HOST_RATIO
            } else {
                // No incident capacity: no path can leave this host.
                continue;
            };
            row.push((u, m.add_binary(format!("chi_{i}_{u}"), ratio)));
        }
        vars.push(row);
    }
    for (i, row) in vars.iter().enumerate() {
        m.add_constraint(format!("assign_{i}"), row.iter().map(|&(_, v)| (v, 1.0)).collect(), Relation::Eq, 1.0);
    }
    let mut hosts: std::collections::BTreeMap<NodeId, Vec<(VarId, f64)>> = Default::default();
    for row in &vars {
        for &(u, v) in row {
            hosts.entry(u).or_default().push((v, 1.0));
        }
    }
    for (u, terms) in hosts {
        if terms.len() > 1 {
            m.add_constraint(format!("host_{u}"), terms, Relation::Le, 1.0);
        }
    }
    (m, vars)
}

/// Injective node map of minimum weighted cost.
pub fn solve_lp_n(
    aug: &AugmentedNetwork,
    w: &NodeWeights,
    time_limit: Option<Duration>,
) -> Result<Vec<NodeId>, Rejection> {
    let (m, vars) = lp_n_model(aug, w);
    if vars.iter().any(Vec::is_empty) {
        return Err(Rejection::NodeMapInfeasible);
    }
    let s = match solve_bip(&m, &BipOptions::with_time_limit(time_limit)) {
        Ok(s) => s,
        Err(SolverError::TimeLimit { incumbent: Some(s), .. }) => *s,
        Err(SolverError::TimeLimit { incumbent: None, .. }) => {
            return Err(Rejection::TimeLimit { stage: "node mapping".into() })
        }
        Err(e) => return Err(Rejection::Solver(e.to_string())),
    };
    if s.status != Status::Optimal {
        return Err(Rejection::NodeMapInfeasible);
    }
    Ok(vars.iter().map(|row| row.iter().find(|(_, v)| s.value(*v) > 0.5).expect("assigned").0).collect())
}

#[derive(Debug, Clone)]
pub struct InitialSolution {
    pub node_map: Vec<NodeId>,
    /// One path per virtual link, in virtual-link order.
    pub pool: Vec<AugPath>,
}

/// Maps nodes with the weighted program, then routes the virtual links in index
/// order, each on a `1/A`-shortest path over a scratch copy of the residuals from
/// which the earlier links' demands have been deducted. The pool is therefore
/// jointly feasible for the master program.
pub fn init_sol(aug: &AugmentedNetwork, time_limit: Option<Duration>) -> Result<InitialSolution, Rejection> {
    let sn = aug.base;
    let weights = NodeWeights::compute(sn, aug.vn);
    let node_map = solve_lp_n(aug, &weights, time_limit)?;
    let mut residual = sn.residual_bw_table().to_vec();
    let mut pool = Vec::with_capacity(aug.vn.links().len());
    for (k, vl) in aug.vn.links().iter().enumerate() {
        let costs = inverse_residual_costs(&residual);
        let (s, t) = (node_map[vl.i], node_map[vl.j]);
        let (path, _) =
            dijkstra_with_residuals(sn, &residual, s, t, vl.bw, &costs).ok_or(Rejection::NoPath { virtual_link: k })?;
        for &l in path.links() {
            residual[l] -= vl.bw;
        }
        pool.push(AugPath { virtual_link: k, path });
    }
    Ok(InitialSolution { node_map, pool })
}
