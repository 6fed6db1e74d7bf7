//! Exact optimization backend: linear programs with dual values and
//! branch-and-bound for binary programs.
//!
//! Clients build a [`Model`], call [`solve_lp`] or [`solve_bip`] and read values,
//! duals and status off the returned [`Solution`].
//!
//! Dual sign convention: `duals[i]` is the marginal change of the optimal
//! objective per unit increase of `rhs[i]`, in the model's own sense. For a
//! minimization this makes duals of `>=` rows non-negative and duals of `<=` rows
//! non-positive; for a maximization the signs flip. Equality duals are free.

mod bnb;
mod simplex;

use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

pub use bnb::{solve_bip, solve_bip_with_stats, BipOptions, BipStats};
use simplex::{Failure, LpStatus, StandardLp, Tableau};

/// Primal feasibility and complementary-slackness tolerance.
pub const EPS_FEAS: f64 = 1e-7;
/// Tolerance on `|primal objective - dual objective|` (relative to `max(1, |obj|)`).
pub const EPS_GAP: f64 = 1e-6;
/// A value within this distance of an integer counts as integral.
pub const EPS_INT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ConId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub objective: f64,
    pub integer: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Model {
    pub sense: Sense,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    pub status: Status,
    /// One value per variable; empty unless `status` is `Optimal`.
    pub values: Vec<f64>,
    /// One dual per constraint; empty unless `status` is `Optimal`.
    pub duals: Vec<f64>,
    /// Reduced cost per variable, in the model's sense.
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
}

impl Solution {
    fn without_values(status: Status) -> Self {
        let objective = match status {
            Status::Unbounded => f64::NEG_INFINITY,
            _ => f64::NAN,
        };
        Solution { status, values: vec![], duals: vec![], reduced_costs: vec![], objective }
    }

    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.0]
    }

    pub fn dual(&self, c: ConId) -> f64 {
        self.duals[c.0]
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("malformed model: {0}")]
    InvalidModel(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("search limit reached (gap {gap:.3e})")]
    TimeLimit { incumbent: Option<Box<Solution>>, best_bound: f64, gap: f64 },
}

impl Model {
    pub fn new(sense: Sense) -> Self {
        Model { sense, variables: vec![], constraints: vec![] }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, objective: f64, integer: bool) -> VarId {
        self.variables.push(Variable { name: name.into(), lower, upper, objective, integer });
        VarId(self.variables.len() - 1)
    }

    pub fn add_binary(&mut self, name: impl Into<String>, objective: f64) -> VarId {
        self.add_var(name, 0.0, 1.0, objective, true)
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarId, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> ConId {
        self.constraints.push(Constraint { name: name.into(), terms, relation, rhs });
        ConId(self.constraints.len() - 1)
    }

    pub fn var_count(&self) -> usize {
        self.variables.len()
    }

    pub fn constraint_count(&self) -> usize {
        self.constraints.len()
    }

    /// Same model with every integrality flag cleared.
    pub fn relaxed(&self) -> Model {
        let mut m = self.clone();
        m.variables.iter_mut().for_each(|v| v.integer = false);
        m
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        for (k, v) in self.variables.iter().enumerate() {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper || !v.objective.is_finite() {
                return Err(SolverError::InvalidModel(format!("variable {k} ({}) has bad data", v.name)));
            }
        }
        for (k, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(SolverError::InvalidModel(format!("constraint {k} has non-finite rhs")));
            }
            for &(v, a) in &c.terms {
                if v.0 >= self.variables.len() || !a.is_finite() {
                    return Err(SolverError::InvalidModel(format!(
                        "constraint {k} ({}) references an undeclared variable or bad coefficient",
                        c.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Objective value of `values` in the model's sense.
    pub fn evaluate(&self, values: &[f64]) -> f64 {
        self.variables.iter().zip(values).map(|(v, x)| v.objective * x).sum()
    }

    /// Whether `values` satisfies every bound, integrality requirement and row within `tol`.
    pub fn is_feasible(&self, values: &[f64], tol: f64) -> bool {
        let bounds =
            self.variables.iter().zip(values).all(|(v, &x)| {
                x >= v.lower - tol && x <= v.upper + tol && (!v.integer || (x - x.round()).abs() <= tol)
            });
        bounds
            && self.constraints.iter().all(|c| {
                let lhs: f64 = c.terms.iter().map(|&(v, a)| a * values[v.0]).sum();
                let tol = tol * c.rhs.abs().max(1.0);
                match c.relation {
                    Relation::Le => lhs <= c.rhs + tol,
                    Relation::Ge => lhs >= c.rhs - tol,
                    Relation::Eq => (lhs - c.rhs).abs() <= tol,
                }
            })
    }

    fn standard_form(&self) -> StandardLp {
        let sign = match self.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let n = self.variables.len();
        let mut rows = Vec::with_capacity(self.constraints.len());
        for c in &self.constraints {
            // Merge duplicate references so every row is a proper sparse vector.
            let mut row: Vec<(usize, f64)> = c.terms.iter().map(|&(v, a)| (v.0, a)).collect();
            row.sort_by_key(|&(j, _)| j);
            row.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
            row.retain(|&(_, a)| a != 0.0);
            rows.push(row);
        }
        StandardLp {
            n,
            rows,
            relations: self.constraints.iter().map(|c| c.relation).collect(),
            rhs: self.constraints.iter().map(|c| c.rhs).collect(),
            cost: self.variables.iter().map(|v| sign * v.objective).collect(),
            lower: self.variables.iter().map(|v| v.lower).collect(),
            upper: self.variables.iter().map(|v| v.upper).collect(),
        }
    }

    /// Dumps the model in CPLEX LP text format.
    pub fn to_lp_format(&self) -> String {
        fn name(prefix: &str, k: usize, raw: &str) -> String {
            let clean: String =
                raw.chars().map(|c| if c.is_ascii_alphanumeric() || "_.[]".contains(c) { c } else { '_' }).collect();
            if clean.is_empty() || clean.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
                format!("{prefix}{k}_{clean}")
            } else {
                clean
            }
        }
        fn linear(out: &mut String, terms: impl Iterator<Item = (f64, String)>) {
            let mut first = true;
            for (a, v) in terms {
                if a == 0.0 {
                    continue;
                }
                match (a < 0.0, first) {
                    (true, _) => out.push_str(" -"),
                    (false, false) => out.push_str(" +"),
                    (false, true) => {}
                }
                let _ = write!(out, " {} {v}", a.abs());
                first = false;
            }
            if first {
                out.push_str(" 0");
            }
        }
        let vn: Vec<String> = self.variables.iter().enumerate().map(|(k, v)| name("x", k, &v.name)).collect();
        let mut out = String::new();
        out.push_str(match self.sense {
            Sense::Minimize => "Minimize\n obj:",
            Sense::Maximize => "Maximize\n obj:",
        });
        linear(&mut out, self.variables.iter().zip(&vn).map(|(v, n)| (v.objective, n.clone())));
        out.push_str("\nSubject To\n");
        for (k, c) in self.constraints.iter().enumerate() {
            let _ = write!(out, " {}:", name("c", k, &c.name));
            linear(&mut out, c.terms.iter().map(|&(v, a)| (a, vn[v.0].clone())));
            let rel = match c.relation {
                Relation::Le => "<=",
                Relation::Eq => "=",
                Relation::Ge => ">=",
            };
            let _ = writeln!(out, " {rel} {}", c.rhs);
        }
        out.push_str("Bounds\n");
        for (v, n) in self.variables.iter().zip(&vn) {
            let lo = if v.lower.is_finite() { v.lower.to_string() } else { "-inf".into() };
            let hi = if v.upper.is_finite() { v.upper.to_string() } else { "+inf".into() };
            let _ = writeln!(out, " {lo} <= {n} <= {hi}");
        }
        let bins: Vec<&String> = self.variables.iter().zip(&vn).filter(|(v, _)| v.integer).map(|(_, n)| n).collect();
        if !bins.is_empty() {
            out.push_str("Binaries\n");
            for n in bins {
                let _ = writeln!(out, " {n}");
            }
        }
        out.push_str("End\n");
        out
    }
}

/// Options for a single LP solve.
#[derive(Debug, Clone, Copy, Default)]
pub struct LpOptions {
    pub time_limit: Option<Duration>,
}

/// Solves the continuous relaxation of `model` (integrality flags are ignored).
pub fn solve_lp(model: &Model) -> Result<Solution, SolverError> {
    solve_lp_with(model, &LpOptions::default())
}

pub fn solve_lp_with(model: &Model, opts: &LpOptions) -> Result<Solution, SolverError> {
    model.validate()?;
    let lp = model.standard_form();
    let deadline = opts.time_limit.map(|d| Instant::now() + d);
    let (status, tab) = Tableau::solve(&lp, deadline).map_err(|f| failure(f, None))?;
    let sol = extract(model, &tab, status)?;
    Ok(sol)
}

fn failure(f: Failure, incumbent: Option<Box<Solution>>) -> SolverError {
    match f {
        Failure::Deadline => SolverError::TimeLimit { incumbent, best_bound: f64::NAN, gap: f64::INFINITY },
        Failure::Stalled => SolverError::NumericalFailure("simplex iteration cap exceeded".into()),
        Failure::NotDualFeasible => SolverError::NumericalFailure("warm start not dual feasible".into()),
    }
}

/// Reads a solution off an optimal tableau and checks it against the original data.
fn extract(model: &Model, tab: &Tableau, status: LpStatus) -> Result<Solution, SolverError> {
    match status {
        LpStatus::Infeasible => return Ok(Solution::without_values(Status::Infeasible)),
        LpStatus::Unbounded => return Ok(Solution::without_values(Status::Unbounded)),
        LpStatus::Optimal => {}
    }
    let violation = tab.primal_violation();
    let scale = model.constraints.iter().fold(1.0f64, |a, c| a.max(c.rhs.abs()));
    if violation > 10.0 * EPS_FEAS * scale {
        return Err(SolverError::NumericalFailure(format!("primal violation {violation:.3e} after simplex")));
    }
    let sign = match model.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let values = tab.primal_values();
    let duals: Vec<f64> = tab.row_duals().into_iter().map(|y| sign * y).collect();
    let reduced_costs: Vec<f64> = tab.reduced_costs().into_iter().map(|d| sign * d).collect();
    let objective = model.evaluate(&values);
    let (lower, upper) = tab.structural_bounds();
    let check = duality_check_with_bounds(model, lower, upper, &values, &duals);
    record_gap(check.gap);
    debug_assert!(
        check.gap <= EPS_GAP * objective.abs().max(1.0),
        "strong duality violated: primal {} dual {}",
        check.primal,
        check.dual
    );
    Ok(Solution { status: Status::Optimal, values, duals, reduced_costs, objective })
}

/// Primal/dual agreement of an optimal LP solution, recomputed from the model data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualityCheck {
    pub primal: f64,
    pub dual: f64,
    /// `|primal - dual|`.
    pub gap: f64,
    /// Largest row or bound violation of the primal values.
    pub primal_violation: f64,
    /// Largest sign violation of a dual or a reduced cost.
    pub dual_violation: f64,
    /// Largest `|dual * slack|` over the rows.
    pub complementarity: f64,
}

/// Checks strong duality for an optimal `sol` of the relaxation of `model`.
pub fn duality_check(model: &Model, sol: &Solution) -> DualityCheck {
    let lower: Vec<f64> = model.variables.iter().map(|v| v.lower).collect();
    let upper: Vec<f64> = model.variables.iter().map(|v| v.upper).collect();
    duality_check_with_bounds(model, &lower, &upper, &sol.values, &sol.duals)
}

fn duality_check_with_bounds(
    model: &Model,
    lower: &[f64],
    upper: &[f64],
    values: &[f64],
    duals: &[f64],
) -> DualityCheck {
    // Work in minimization form: c' = sign * c, y' = sign * y.
    let sign = match model.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut d: Vec<f64> = model.variables.iter().map(|v| sign * v.objective).collect();
    let mut dual = 0.0;
    let mut dual_violation = 0.0f64;
    let mut primal_violation = 0.0f64;
    let mut complementarity = 0.0f64;
    for (c, &y) in model.constraints.iter().zip(duals) {
        let y = sign * y;
        dual += c.rhs * y;
        let mut ax = 0.0;
        for &(v, a) in &c.terms {
            d[v.0] -= y * a;
            ax += a * values[v.0];
        }
        let slack = ax - c.rhs;
        match c.relation {
            Relation::Le => {
                dual_violation = dual_violation.max(y);
                primal_violation = primal_violation.max(slack);
            }
            Relation::Ge => {
                dual_violation = dual_violation.max(-y);
                primal_violation = primal_violation.max(-slack);
            }
            Relation::Eq => primal_violation = primal_violation.max(slack.abs()),
        }
        if c.relation != Relation::Eq {
            complementarity = complementarity.max((y * slack).abs());
        }
    }
    for (j, &dj) in d.iter().enumerate() {
        primal_violation = primal_violation.max(lower[j] - values[j]).max(values[j] - upper[j]);
        if dj > 0.0 {
            if lower[j].is_finite() {
                dual += dj * lower[j];
            } else {
                dual_violation = dual_violation.max(dj);
            }
        } else if dj < 0.0 {
            if upper[j].is_finite() {
                dual += dj * upper[j];
            } else {
                dual_violation = dual_violation.max(-dj);
            }
        }
    }
    let primal = model.evaluate(values);
    let dual = sign * dual;
    DualityCheck { primal, dual, gap: (primal - dual).abs(), primal_violation, dual_violation, complementarity }
}

static MAX_GAP_BITS: AtomicU64 = AtomicU64::new(0);
static SOLVED_LPS: AtomicU64 = AtomicU64::new(0);

fn record_gap(gap: f64) {
    SOLVED_LPS.fetch_add(1, Ordering::Relaxed);
    let _ = MAX_GAP_BITS.fetch_update(Ordering::Relaxed, Ordering::Relaxed, |bits| {
        (gap > f64::from_bits(bits)).then_some(gap.to_bits())
    });
}

/// Process-wide record of every optimal LP solved: `(count, largest duality gap)`.
pub fn duality_stats() -> (u64, f64) {
    (SOLVED_LPS.load(Ordering::Relaxed), f64::from_bits(MAX_GAP_BITS.load(Ordering::Relaxed)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_variable_lower_bound_row() {
        let mut m = Model::new(Sense::Minimize);
        let x = m.add_var("x", f64::NEG_INFINITY, f64::INFINITY, 1.0, false);
        let c = m.add_constraint("c", vec![(x, 1.0)], Relation::Ge, 5.0);
        let s = solve_lp(&m).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert!((s.value(x) - 5.0).abs() < 1e-9);
        assert!((s.dual(c) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn maximization_duals_follow_shadow_price_signs() {
        // max 3x + 2y, x + y <= 4, x + 3y <= 7, x <= 3
        let mut m = Model::new(Sense::Maximize);
        let x = m.add_var("x", 0.0, f64::INFINITY, 3.0, false);
        let y = m.add_var("y", 0.0, f64::INFINITY, 2.0, false);
        let c1 = m.add_constraint("c1", vec![(x, 1.0), (y, 1.0)], Relation::Le, 4.0);
        let c2 = m.add_constraint("c2", vec![(x, 1.0), (y, 3.0)], Relation::Le, 7.0);
        let c3 = m.add_constraint("c3", vec![(x, 1.0)], Relation::Le, 3.0);
        let s = solve_lp(&m).unwrap();
        assert!((s.objective - 11.0).abs() < 1e-9);
        assert!((s.dual(c1) - 2.0).abs() < 1e-9);
        assert!(s.dual(c2).abs() < 1e-9);
        assert!((s.dual(c3) - 1.0).abs() < 1e-9);
        let check = duality_check(&m, &s);
        assert!(check.gap < 1e-9 && check.dual_violation < 1e-9);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut m = Model::new(Sense::Minimize);
        let x = m.add_var("x", 0.0, f64::INFINITY, 1.0, false);
        m.add_constraint("a", vec![(x, 1.0)], Relation::Le, 1.0);
        m.add_constraint("b", vec![(x, 1.0)], Relation::Ge, 2.0);
        assert_eq!(solve_lp(&m).unwrap().status, Status::Infeasible);

        let mut m = Model::new(Sense::Minimize);
        let x = m.add_var("x", f64::NEG_INFINITY, 0.0, 1.0, false);
        let y = m.add_var("y", 0.0, 1.0, 0.0, false);
        m.add_constraint("a", vec![(x, 1.0), (y, 1.0)], Relation::Le, 1.0);
        assert_eq!(solve_lp(&m).unwrap().status, Status::Unbounded);
    }

    #[test]
    fn equality_rows_and_free_variables() {
        // min x1 - x2, x1 + x2 = 2, x1 - x2 >= -4, x2 free, x1 >= 0 -> x1 = 0, x2 = 2? no:
        // x2 = 2 - x1, obj = 2 x1 - 2, constraint 2 x1 - 2 >= -4 -> x1 >= -1, so x1 = 0.
        let mut m = Model::new(Sense::Minimize);
        let x1 = m.add_var("x1", 0.0, f64::INFINITY, 1.0, false);
        let x2 = m.add_var("x2", f64::NEG_INFINITY, f64::INFINITY, -1.0, false);
        let e = m.add_constraint("e", vec![(x1, 1.0), (x2, 1.0)], Relation::Eq, 2.0);
        m.add_constraint("g", vec![(x1, 1.0), (x2, -1.0)], Relation::Ge, -4.0);
        let s = solve_lp(&m).unwrap();
        assert!((s.objective + 2.0).abs() < 1e-9);
        assert!((s.value(x2) - 2.0).abs() < 1e-9);
        assert!((s.dual(e) + 1.0).abs() < 1e-9);
    }

    #[test]
    fn duplicate_terms_are_merged() {
        let mut m = Model::new(Sense::Minimize);
        let x = m.add_var("x", 0.0, 10.0, -1.0, false);
        m.add_constraint("c", vec![(x, 1.0), (x, 1.0)], Relation::Le, 4.0);
        assert!((solve_lp(&m).unwrap().value(x) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_undeclared_variables() {
        let mut m = Model::new(Sense::Minimize);
        m.add_constraint("c", vec![(VarId(3), 1.0)], Relation::Le, 4.0);
        assert!(matches!(solve_lp(&m), Err(SolverError::InvalidModel(_))));
    }

    #[test]
    fn lp_format_dump() {
        let mut m = Model::new(Sense::Maximize);
        let a = m.add_binary("a", 3.0);
        let b = m.add_binary("b", 2.0);
        m.add_constraint("cap", vec![(a, 1.0), (b, 1.0)], Relation::Le, 1.0);
        let text = m.to_lp_format();
        assert!(text.starts_with("Maximize\n obj: 3 a + 2 b\n"));
        assert!(text.contains(" cap: 1 a + 1 b <= 1\n"));
        assert!(text.contains("Binaries\n a\n b\nEnd\n"));
    }
}
