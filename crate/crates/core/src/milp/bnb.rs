//! Best-bound branch-and-bound over LP relaxations, diving into one child after
//! every branching so the warm-started tableau stays close to its last basis.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::simplex::{Failure, LpStatus, StandardLp, Tableau};
use super::{extract, failure, Model, Sense, Solution, SolverError, Status, EPS_FEAS, EPS_INT};

/// Options for [`solve_bip`].
#[derive(Debug, Clone, Default)]
pub struct BipOptions {
    pub time_limit: Option<Duration>,
    /// Simplex iterations allowed across the whole search. Unlike the time limit
    /// this stops at the same point on every run.
    pub work_limit: Option<usize>,
    /// A known feasible point, used as the first incumbent if it checks out.
    pub incumbent: Option<Vec<f64>>,
    /// Branching priority per variable; fractional variables of the highest
    /// priority are branched on first. Empty means all equal.
    pub priority: Vec<u32>,
}

impl BipOptions {
    pub fn with_time_limit(time_limit: Option<Duration>) -> Self {
        BipOptions { time_limit, ..Default::default() }
    }
}

/// Counters from one branch-and-bound run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipStats {
    pub nodes: usize,
    pub simplex_iterations: usize,
    pub cold_restarts: usize,
}

struct Node {
    bound: f64,
    seq: usize,
    /// `(variable, lower, upper)` overrides relative to the root bounds.
    fixes: Vec<(usize, f64, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // The heap pops the greatest element: lowest bound first, newest node on ties.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then(self.seq.cmp(&other.seq))
    }
}

/// Solves `model` to integral optimality. Solutions of problems that needed
/// branching carry no duals or reduced costs; when the root relaxation is already
/// integral the relaxation's solution is returned unchanged.
pub fn solve_bip(model: &Model, opts: &BipOptions) -> Result<Solution, SolverError> {
    solve_bip_with_stats(model, opts).0
}

/// [`solve_bip`] plus search counters, which are reported on every outcome.
pub fn solve_bip_with_stats(model: &Model, opts: &BipOptions) -> (Result<Solution, SolverError>, BipStats) {
    let mut stats = BipStats::default();
    let result = search(model, opts, &mut stats);
    (result, stats)
}

fn search(model: &Model, opts: &BipOptions, stats: &mut BipStats) -> Result<Solution, SolverError> {
    model.validate()?;
    let deadline = opts.time_limit.map(|d| Instant::now() + d);
    let lp = model.standard_form();
    let integer: Vec<usize> = (0..model.var_count()).filter(|&j| model.variables[j].integer).collect();
    let mut root_lower = lp.lower.clone();
    let mut root_upper = lp.upper.clone();
    for &j in &integer {
        root_lower[j] = root_lower[j].ceil();
        root_upper[j] = root_upper[j].floor();
        if root_lower[j] > root_upper[j] {
            return Ok(Solution::without_values(Status::Infeasible));
        }
    }
    let root_lp = StandardLp { lower: root_lower.clone(), upper: root_upper.clone(), ..lp.clone() };

    stats.nodes = 1;
    let (status, root) = Tableau::solve(&root_lp, deadline).map_err(|f| failure(f, None))?;
    stats.simplex_iterations += root.iterations();
    match status {
        LpStatus::Infeasible => return Ok(Solution::without_values(Status::Infeasible)),
        LpStatus::Unbounded => return Ok(Solution::without_values(Status::Unbounded)),
        LpStatus::Optimal => {}
    }
    let root_x = root.primal_values();
    let pick = Picker { integer: &integer, priority: &opts.priority };
    if pick.branch_var(&root_x).is_none() {
        let mut sol = extract(model, &root, status)?;
        snap(&mut sol.values, &integer);
        sol.objective = model.evaluate(&sol.values);
        return Ok(sol);
    }

    let sign = if model.sense == Sense::Minimize { 1.0 } else { -1.0 };
    let mut work = root.clone();
    let mut incumbent: Option<(f64, Vec<f64>)> =
        opts.incumbent.as_ref().filter(|x| x.len() == model.var_count() && model.is_feasible(x, EPS_FEAS)).map(|x| {
            let mut x = x.clone();
            snap(&mut x, &integer);
            (dot(&lp.cost, &x), x)
        });
    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    let root_bound = dot(&lp.cost, &root_x);
    let root_bounds = (root_lower.as_slice(), root_upper.as_slice());
    let mut dive = Some(pick.branch(&root_x, root_bound, &[], root_bounds, &mut heap, &mut seq));

    let mut lower = root_lower.clone();
    let mut upper = root_upper.clone();
    while let Some(node) = dive.take().or_else(|| heap.pop()) {
        if let Some((inc, _)) = &incumbent {
            if pruned(node.bound, *inc) {
                continue;
            }
        }
        let out_of_work = opts.work_limit.is_some_and(|w| stats.simplex_iterations >= w);
        if out_of_work || deadline.is_some_and(|d| Instant::now() >= d) {
            heap.push(node);
            return Err(time_limit(model, incumbent, &heap, sign));
        }
        stats.nodes += 1;
        lower.copy_from_slice(&root_lower);
        upper.copy_from_slice(&root_upper);
        for &(j, lo, hi) in &node.fixes {
            lower[j] = lo;
            upper[j] = hi;
        }
        let before = work.iterations();
        let warm = work.reoptimize(&lower, &upper, deadline);
        stats.simplex_iterations += work.iterations().saturating_sub(before);
        let outcome = match warm {
            Ok(LpStatus::Optimal) if work.primal_violation() <= 1e-6 && certified(&work, &lp.cost) => {
                Some(work.primal_values())
            }
            Ok(LpStatus::Infeasible) => None,
            Err(Failure::Deadline) => {
                heap.push(node);
                return Err(time_limit(model, incumbent, &heap, sign));
            }
            _ => {
                // Warm start failed numerically: solve this node from scratch and
                // restart the warm tableau from the root.
                stats.cold_restarts += 1;
                work = root.clone();
                let node_lp = StandardLp { lower: lower.clone(), upper: upper.clone(), ..lp.clone() };
                match Tableau::solve(&node_lp, deadline) {
                    Ok((LpStatus::Optimal, t)) => {
                        stats.simplex_iterations += t.iterations();
                        Some(t.primal_values())
                    }
                    Ok((_, t)) => {
                        stats.simplex_iterations += t.iterations();
                        None
                    }
                    Err(Failure::Deadline) => {
                        heap.push(node);
                        return Err(time_limit(model, incumbent, &heap, sign));
                    }
                    Err(f) => return Err(failure(f, None)),
                }
            }
        };
        let Some(x) = outcome else { continue };
        let bound = dot(&lp.cost, &x);
        if let Some((inc, _)) = &incumbent {
            if pruned(bound, *inc) {
                continue;
            }
        }
        if pick.branch_var(&x).is_none() {
            let mut x = x;
            snap(&mut x, &integer);
            let obj = dot(&lp.cost, &x);
            if incumbent.as_ref().is_none_or(|(inc, _)| obj < *inc) {
                incumbent = Some((obj, x));
            }
            continue;
        }
        dive = Some(pick.branch(&x, bound, &node.fixes, root_bounds, &mut heap, &mut seq));
    }

    match incumbent {
        None => Ok(Solution::without_values(Status::Infeasible)),
        Some((_, values)) => {
            let objective = model.evaluate(&values);
            Ok(Solution { status: Status::Optimal, values, duals: vec![], reduced_costs: vec![], objective })
        }
    }
}

/// The warm tableau's optimum agrees with the bound its duals prove.
fn certified(t: &Tableau, cost: &[f64]) -> bool {
    let obj = dot(cost, &t.primal_values());
    obj - t.lagrangian_bound() <= 1e-7 * obj.abs().max(1.0)
}

fn pruned(bound: f64, incumbent: f64) -> bool {
    bound >= incumbent - 1e-9 * incumbent.abs().max(1.0)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn snap(x: &mut [f64], integer: &[usize]) {
    for &j in integer {
        x[j] = x[j].round();
    }
}

struct Picker<'a> {
    integer: &'a [usize],
    priority: &'a [u32],
}

impl Picker<'_> {
    /// Fractional integer variable of top priority whose value is closest to
    /// half-integral; lowest index on ties.
    fn branch_var(&self, x: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, u32, f64)> = None;
        for &j in self.integer {
            let frac = x[j] - x[j].floor();
            if frac <= EPS_INT || frac >= 1.0 - EPS_INT {
                continue;
            }
            let pri = self.priority.get(j).copied().unwrap_or(0);
            let score = (frac - 0.5).abs();
            if best.is_none_or(|(_, p, s)| pri > p || (pri == p && score < s)) {
                best = Some((j, pri, score));
            }
        }
        best.map(|(j, _, _)| j)
    }

    /// Splits on the branching variable. The child on the side `x_j` rounds to is
    /// returned for diving; the other goes on the heap.
    fn branch(
        &self,
        x: &[f64],
        bound: f64,
        fixes: &[(usize, f64, f64)],
        root: (&[f64], &[f64]),
        heap: &mut BinaryHeap<Node>,
        seq: &mut usize,
    ) -> Node {
        let j = self.branch_var(x).expect("fractional variable");
        let (lo, hi) = fixes.iter().rev().find(|f| f.0 == j).map_or((root.0[j], root.1[j]), |f| (f.1, f.2));
        let down = x[j].floor();
        let mut child = |l: f64, h: f64| {
            let mut f = fixes.to_vec();
            f.retain(|f| f.0 != j);
            f.push((j, l, h));
            *seq += 1;
            Node { bound, seq: *seq, fixes: f }
        };
        let lo_child = child(lo, down);
        let hi_child = child(down + 1.0, hi);
        if x[j] - down >= 0.5 {
            heap.push(lo_child);
            hi_child
        } else {
            heap.push(hi_child);
            lo_child
        }
    }
}

fn time_limit(model: &Model, incumbent: Option<(f64, Vec<f64>)>, heap: &BinaryHeap<Node>, sign: f64) -> SolverError {
    let open = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    let best = incumbent.as_ref().map_or(open, |(inc, _)| open.min(*inc));
    let gap = incumbent.as_ref().map_or(f64::INFINITY, |(inc, _)| (inc - best).max(0.0) / inc.abs().max(1e-10));
    SolverError::TimeLimit {
        incumbent: incumbent.map(|(_, values)| {
            let objective = model.evaluate(&values);
            Box::new(Solution { status: Status::Optimal, values, duals: vec![], reduced_costs: vec![], objective })
        }),
        best_bound: sign * best,
        gap,
    }
}
