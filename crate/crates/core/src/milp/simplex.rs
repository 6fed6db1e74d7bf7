//! Dense bounded-variable simplex.
//!
//! The tableau stores `B^-1 [A | L | R]` where `L` holds one logical column per row
//! (slack for inequalities, a fixed column for equalities) and `R` the phase-one
//! artificials. Because every row has a logical column equal to `coef * e_i`,
//! `B^-1` can always be read back from the tableau, which is what the dual values
//! and the from-scratch recomputation of primal values rely on.
//!
//! Pricing is Dantzig's rule with a Harris ratio test; after a run of degenerate
//! pivots the solver switches to Bland's rule until progress resumes, which rules
//! out cycling. The dual simplex is used to re-optimize after bound changes during
//! branch-and-bound.

use std::time::Instant;

use super::Relation;

const PIVOT_TOL: f64 = 1e-9;
pub(crate) const FEAS_TOL: f64 = 1e-7;
const OPT_TOL: f64 = 1e-9;
const DROP_TOL: f64 = 1e-13;
const DEGENERATE_RUN: usize = 50;

/// `min cost . x` subject to sparse rows and variable bounds.
#[derive(Debug, Clone)]
pub(crate) struct StandardLp {
    pub n: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub relations: Vec<Relation>,
    pub rhs: Vec<f64>,
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Failure {
    Stalled,
    Deadline,
    /// Warm start impossible: a nonbasic column has a reduced cost that no finite
    /// bound can make dual feasible.
    NotDualFeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    Lower,
    Upper,
    Free,
}

#[derive(Debug, Clone)]
pub(crate) struct Tableau<'a> {
    lp: &'a StandardLp,
    m: usize,
    ncols: usize,
    t: Vec<f64>,
    beta: Vec<f64>,
    d: Vec<f64>,
    cost: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<State>,
    logical_coef: Vec<f64>,
    /// Row and coefficient of each artificial column, in column order from `n + m`.
    artificials: Vec<(usize, f64)>,
    pivot_row: Vec<(usize, f64)>,
    iterations: usize,
    iteration_cap: usize,
}

impl<'a> Tableau<'a> {
    /// Solves `lp` from scratch with a two-phase primal simplex.
    pub(crate) fn solve(lp: &'a StandardLp, deadline: Option<Instant>) -> Result<(LpStatus, Tableau<'a>), Failure> {
        let mut tab = Tableau::new(lp);
        if !tab.artificials.is_empty() {
            let status = tab.primal(deadline)?;
            debug_assert_eq!(status, LpStatus::Optimal, "phase one is bounded below");
            let infeasibility: f64 = (lp.n + tab.m..tab.ncols).map(|j| tab.value(j)).sum();
            let scale = lp.rhs.iter().fold(1.0f64, |a, b| a.max(b.abs()));
            if infeasibility > FEAS_TOL * scale {
                return Ok((LpStatus::Infeasible, tab));
            }
            for j in lp.n + tab.m..tab.ncols {
                tab.ub[j] = 0.0;
                if tab.state[j] != State::Basic {
                    tab.state[j] = State::Lower;
                }
            }
        }
        tab.cost = vec![0.0; tab.ncols];
        tab.cost[..lp.n].copy_from_slice(&lp.cost);
        tab.recompute_duals();
        tab.recompute_primal();
        let status = tab.primal(deadline)?;
        Ok((status, tab))
    }

    fn new(lp: &'a StandardLp) -> Self {
        let m = lp.rows.len();
        let n = lp.n;
        let mut state = Vec::with_capacity(n + m);
        for j in 0..n {
            state.push(if lp.lower[j].is_finite() {
                State::Lower
            } else if lp.upper[j].is_finite() {
                State::Upper
            } else {
                State::Free
            });
        }
        let nonbasic_value = |j: usize| match state[j] {
            State::Lower => lp.lower[j],
            State::Upper => lp.upper[j],
            _ => 0.0,
        };
        let mut logical_coef = Vec::with_capacity(m);
        let mut residual = Vec::with_capacity(m);
        let mut artificials = Vec::new();
        let mut use_logical = Vec::with_capacity(m);
        for (i, row) in lp.rows.iter().enumerate() {
            let r = lp.rhs[i] - row.iter().map(|&(j, a)| a * nonbasic_value(j)).sum::<f64>();
            let coef = if lp.relations[i] == Relation::Ge { -1.0 } else { 1.0 };
            let logical_value = r / coef;
            let ok = match lp.relations[i] {
                Relation::Eq => false,
                _ => logical_value >= 0.0,
            };
            logical_coef.push(coef);
            residual.push(r);
            use_logical.push(ok);
            if !ok {
                artificials.push((i, if r < 0.0 { -1.0 } else { 1.0 }));
            }
        }
        let ncols = n + m + artificials.len();
        let mut lb = Vec::with_capacity(ncols);
        let mut ub = Vec::with_capacity(ncols);
        lb.extend_from_slice(&lp.lower);
        ub.extend_from_slice(&lp.upper);
        for rel in &lp.relations {
            lb.push(0.0);
            ub.push(if *rel == Relation::Eq { 0.0 } else { f64::INFINITY });
        }
        lb.extend(std::iter::repeat_n(0.0, artificials.len()));
        ub.extend(std::iter::repeat_n(f64::INFINITY, artificials.len()));
        state.extend(std::iter::repeat_n(State::Lower, m + artificials.len()));

        let mut t = vec![0.0; m * ncols];
        let mut basis = vec![0; m];
        let mut beta = vec![0.0; m];
        let mut cost = vec![0.0; ncols];
        let mut art_of_row = vec![usize::MAX; m];
        for (k, &(i, _)) in artificials.iter().enumerate() {
            art_of_row[i] = n + m + k;
        }
        for i in 0..m {
            let row = &mut t[i * ncols..(i + 1) * ncols];
            for &(j, a) in &lp.rows[i] {
                row[j] += a;
            }
            row[n + i] = logical_coef[i];
            let (basic, coef) = if use_logical[i] {
                (n + i, logical_coef[i])
            } else {
                let col = art_of_row[i];
                let coef = artificials[col - n - m].1;
                row[col] = coef;
                cost[col] = 1.0;
                (col, coef)
            };
            if coef < 0.0 {
                row.iter_mut().for_each(|v| *v = -*v);
            }
            basis[i] = basic;
            state[basic] = State::Basic;
            beta[i] = residual[i] / coef;
        }
        let iteration_cap = 50 * (m + ncols) + 10_000;
        let mut tab = Tableau {
            lp,
            m,
            ncols,
            t,
            beta,
            d: vec![0.0; ncols],
            cost,
            lb,
            ub,
            basis,
            state,
            logical_coef,
            artificials,
            pivot_row: Vec::with_capacity(ncols),
            iterations: 0,
            iteration_cap,
        };
        tab.recompute_duals();
        tab
    }

    fn value(&self, j: usize) -> f64 {
        match self.state[j] {
            State::Lower => self.lb[j],
            State::Upper => self.ub[j],
            State::Free => 0.0,
            State::Basic => {
                let row = self.basis.iter().position(|&b| b == j).expect("basic column");
                self.beta[row]
            }
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            State::Lower => self.lb[j],
            State::Upper => self.ub[j],
            _ => 0.0,
        }
    }

    /// `B^-1 e_i` scaled: tableau entry `(k, logical_i)` divided by the logical coefficient.
    #[inline]
    fn binv(&self, k: usize, i: usize) -> f64 {
        self.t[k * self.ncols + self.lp.n + i] / self.logical_coef[i]
    }

    /// Row duals `y = c_B B^-1` followed by reduced costs of every column.
    fn recompute_duals(&mut self) {
        let (m, n) = (self.m, self.lp.n);
        let mut y = vec![0.0; m];
        for k in 0..m {
            let cb = self.cost[self.basis[k]];
            if cb != 0.0 {
                for (i, yi) in y.iter_mut().enumerate() {
                    *yi += cb * self.binv(k, i);
                }
            }
        }
        let mut d = self.cost.clone();
        for (i, row) in self.lp.rows.iter().enumerate() {
            if y[i] != 0.0 {
                for &(j, a) in row {
                    d[j] -= y[i] * a;
                }
            }
            d[n + i] -= y[i] * self.logical_coef[i];
        }
        for (k, &(row, coef)) in self.artificials.iter().enumerate() {
            d[n + m + k] -= y[row] * coef;
        }
        for &b in &self.basis {
            d[b] = 0.0;
        }
        self.d = d;
    }

    /// Basic values `B^-1 (b - N x_N)` from the original data.
    fn recompute_primal(&mut self) {
        let m = self.m;
        let mut rhs = self.lp.rhs.clone();
        for (i, row) in self.lp.rows.iter().enumerate() {
            for &(j, a) in row {
                if self.state[j] != State::Basic {
                    rhs[i] -= a * self.nonbasic_value(j);
                }
            }
        }
        // Logical and artificial columns are nonbasic only at value zero.
        let mut beta = vec![0.0; m];
        for (k, bk) in beta.iter_mut().enumerate() {
            let mut s = 0.0;
            for (i, r) in rhs.iter().enumerate() {
                if *r != 0.0 {
                    s += self.binv(k, i) * r;
                }
            }
            *bk = s;
        }
        self.beta = beta;
    }

    fn tick(&mut self, deadline: Option<Instant>) -> Result<(), Failure> {
        self.iterations += 1;
        if self.iterations > self.iteration_cap {
            return Err(Failure::Stalled);
        }
        if self.iterations % 32 == 0 {
            if let Some(d) = deadline {
                if Instant::now() >= d {
                    return Err(Failure::Deadline);
                }
            }
        }
        Ok(())
    }

    /// Primal simplex to optimality. On termination the basic values are
    /// recomputed from the original data; tolerance drift that leaves them
    /// infeasible is repaired with dual pivots before optimality is re-checked.
    fn primal(&mut self, deadline: Option<Instant>) -> Result<LpStatus, Failure> {
        for _ in 0..8 {
            match self.primal_pass(deadline)? {
                LpStatus::Optimal => {}
                other => return Ok(other),
            }
            self.recompute_primal();
            if self.basic_infeasibility() <= FEAS_TOL {
                return Ok(LpStatus::Optimal);
            }
            if self.dual(deadline)? == LpStatus::Infeasible {
                return Ok(LpStatus::Infeasible);
            }
            self.recompute_duals();
        }
        Err(Failure::Stalled)
    }

    fn basic_infeasibility(&self) -> f64 {
        self.basis
            .iter()
            .zip(&self.beta)
            .map(|(&b, &v)| (self.lb[b] - v).max(v - self.ub[b]).max(0.0))
            .fold(0.0, f64::max)
    }

    fn primal_pass(&mut self, deadline: Option<Instant>) -> Result<LpStatus, Failure> {
        let mut degenerate_run = 0usize;
        loop {
            self.tick(deadline)?;
            let bland = degenerate_run >= DEGENERATE_RUN;
            let Some((q, dir)) = self.choose_entering(bland) else {
                return Ok(LpStatus::Optimal);
            };
            let range = self.ub[q] - self.lb[q];
            let leave = self.primal_ratio(q, dir, bland);
            match leave {
                Some((r, step)) if step < range => {
                    degenerate_run = if step <= 1e-12 { degenerate_run + 1 } else { 0 };
                    let b = self.basis[r];
                    let alpha = dir * self.t[r * self.ncols + q];
                    let to_lower = alpha > 0.0;
                    // Move by the ratio-test step, never backwards, even if the
                    // leaving value sits slightly outside its bound.
                    let bound = if to_lower { self.lb[b] } else { self.ub[b] };
                    self.pivot(r, q, bound, to_lower, Some(dir * step));
                }
                _ if range.is_finite() => {
                    degenerate_run = 0;
                    self.flip(q, dir * range);
                }
                _ => return Ok(LpStatus::Unbounded),
            }
        }
    }

    fn choose_entering(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.ncols {
            let dj = self.d[j];
            let dir = match self.state[j] {
                State::Basic => continue,
                _ if self.lb[j] == self.ub[j] => continue,
                State::Lower if dj < -OPT_TOL => 1.0,
                State::Upper if dj > OPT_TOL => -1.0,
                State::Free if dj.abs() > OPT_TOL => -dj.signum(),
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if dj.abs() > best_score {
                best_score = dj.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    /// Harris two-pass ratio test. Returns the leaving row and the step length.
    fn primal_ratio(&self, q: usize, dir: f64, bland: bool) -> Option<(usize, f64)> {
        let nc = self.ncols;
        let limit = |i: usize, tol: f64| -> Option<f64> {
            let a = dir * self.t[i * nc + q];
            let b = self.basis[i];
            if a > PIVOT_TOL && self.lb[b].is_finite() {
                Some(((self.beta[i] - self.lb[b] + tol) / a).max(0.0))
            } else if a < -PIVOT_TOL && self.ub[b].is_finite() {
                Some(((self.ub[b] - self.beta[i] + tol) / -a).max(0.0))
            } else {
                None
            }
        };
        if bland {
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.m {
                if let Some(r) = limit(i, 0.0) {
                    let better = match best {
                        None => true,
                        Some((bi, br)) => r < br - 1e-12 || (r <= br + 1e-12 && self.basis[i] < self.basis[bi]),
                    };
                    if better {
                        best = Some((i, r));
                    }
                }
            }
            return best;
        }
        let mut relaxed = f64::INFINITY;
        for i in 0..self.m {
            if let Some(r) = limit(i, FEAS_TOL) {
                relaxed = relaxed.min(r);
            }
        }
        if !relaxed.is_finite() {
            return None;
        }
        let mut best: Option<(usize, f64, f64)> = None;
        for i in 0..self.m {
            if let Some(r) = limit(i, 0.0) {
                if r <= relaxed {
                    let a = self.t[i * nc + q].abs();
                    if best.is_none_or(|(_, _, ba)| a > ba) {
                        best = Some((i, r, a));
                    }
                }
            }
        }
        best.map(|(i, r, _)| (i, r))
    }

    fn flip(&mut self, q: usize, delta: f64) {
        let nc = self.ncols;
        for i in 0..self.m {
            let a = self.t[i * nc + q];
            if a != 0.0 {
                self.beta[i] -= a * delta;
            }
        }
        self.state[q] = if self.state[q] == State::Lower { State::Upper } else { State::Lower };
    }

    /// Makes `q` basic in row `r`; the leaving column is set to `bound`. The
    /// entering column moves by `step`, or by whatever puts the leaving column
    /// exactly on its bound.
    fn pivot(&mut self, r: usize, q: usize, bound: f64, to_lower: bool, step: Option<f64>) {
        let nc = self.ncols;
        let piv = self.t[r * nc + q];
        let step = step.unwrap_or((self.beta[r] - bound) / piv);
        let entering_value = self.nonbasic_value(q) + step;
        for i in 0..self.m {
            let a = self.t[i * nc + q];
            if i != r && a != 0.0 {
                self.beta[i] -= a * step;
            }
        }
        self.beta[r] = entering_value;

        let inv = 1.0 / piv;
        self.pivot_row.clear();
        {
            let row = &mut self.t[r * nc..(r + 1) * nc];
            for (j, v) in row.iter_mut().enumerate() {
                if *v != 0.0 {
                    *v *= inv;
                    if v.abs() < DROP_TOL {
                        *v = 0.0;
                    } else {
                        self.pivot_row.push((j, *v));
                    }
                }
            }
            row[q] = 1.0;
        }
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let row = &mut self.t[i * nc..(i + 1) * nc];
            let f = row[q];
            if f == 0.0 {
                continue;
            }
            for &(j, p) in &self.pivot_row {
                let v = row[j] - f * p;
                row[j] = if v.abs() < DROP_TOL { 0.0 } else { v };
            }
            row[q] = 0.0;
        }
        let f = self.d[q];
        if f != 0.0 {
            for &(j, p) in &self.pivot_row {
                self.d[j] -= f * p;
            }
        }
        self.d[q] = 0.0;

        let leaving = self.basis[r];
        self.basis[r] = q;
        self.state[q] = State::Basic;
        self.state[leaving] =
            if to_lower || self.lb[leaving] == self.ub[leaving] { State::Lower } else { State::Upper };
    }

    fn dual(&mut self, deadline: Option<Instant>) -> Result<LpStatus, Failure> {
        let nc = self.ncols;
        loop {
            self.tick(deadline)?;
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let b = self.basis[i];
                let v = self.beta[i];
                let infeasibility = if v < self.lb[b] - FEAS_TOL {
                    self.lb[b] - v
                } else if v > self.ub[b] + FEAS_TOL {
                    v - self.ub[b]
                } else {
                    0.0
                };
                if infeasibility > leave.map_or(0.0, |(_, w)| w) {
                    leave = Some((i, infeasibility));
                }
            }
            let Some((r, _)) = leave else {
                return Ok(LpStatus::Optimal);
            };
            let b = self.basis[r];
            let to_lower = self.beta[r] < self.lb[b];
            let eligible = |j: usize| {
                let a = self.t[r * nc + j];
                if a.abs() <= PIVOT_TOL || self.lb[j] == self.ub[j] {
                    return None;
                }
                let ok = match self.state[j] {
                    State::Lower => (a < 0.0) == to_lower,
                    State::Upper => (a > 0.0) == to_lower,
                    State::Free => true,
                    State::Basic => false,
                };
                ok.then_some(a.abs())
            };
            // Harris two-pass test: the largest pivot among ratios within the
            // relaxed minimum, so the tableau does not blow up on tiny pivots.
            let mut relaxed = f64::INFINITY;
            for j in 0..nc {
                if let Some(a) = eligible(j) {
                    relaxed = relaxed.min((self.d[j].abs() + OPT_TOL) / a);
                }
            }
            if !relaxed.is_finite() {
                if self.certifies_infeasible(r) {
                    return Ok(LpStatus::Infeasible);
                }
                return Err(Failure::Stalled);
            }
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..nc {
                if let Some(a) = eligible(j) {
                    if self.d[j].abs() / a <= relaxed && enter.is_none_or(|(_, ba)| a > ba) {
                        enter = Some((j, a));
                    }
                }
            }
            let (q, _) = enter.expect("a column attains the relaxed ratio");
            let bound = if to_lower { self.lb[b] } else { self.ub[b] };
            self.pivot(r, q, bound, to_lower, None);
        }
    }

    /// Re-optimizes after replacing the structural bounds, starting from the
    /// current basis with the dual simplex.
    pub(crate) fn reoptimize(
        &mut self,
        lower: &[f64],
        upper: &[f64],
        deadline: Option<Instant>,
    ) -> Result<LpStatus, Failure> {
        let n = self.lp.n;
        self.lb[..n].copy_from_slice(lower);
        self.ub[..n].copy_from_slice(upper);
        self.recompute_duals();
        for j in 0..self.ncols {
            if self.state[j] == State::Basic {
                continue;
            }
            let (lo, hi, dj) = (self.lb[j], self.ub[j], self.d[j]);
            self.state[j] = if lo == hi {
                State::Lower
            } else if dj > OPT_TOL {
                if !lo.is_finite() {
                    return Err(Failure::NotDualFeasible);
                }
                State::Lower
            } else if dj < -OPT_TOL {
                if !hi.is_finite() {
                    return Err(Failure::NotDualFeasible);
                }
                State::Upper
            } else if self.state[j] == State::Upper && hi.is_finite() {
                State::Upper
            } else if lo.is_finite() {
                State::Lower
            } else if hi.is_finite() {
                State::Upper
            } else {
                State::Free
            };
        }
        self.recompute_primal();
        match self.dual(deadline)? {
            LpStatus::Optimal => self.primal(deadline),
            other => Ok(other),
        }
    }

    pub(crate) fn iterations(&self) -> usize {
        self.iterations
    }

    pub(crate) fn primal_values(&self) -> Vec<f64> {
        let n = self.lp.n;
        let mut x: Vec<f64> = (0..n).map(|j| self.nonbasic_value(j)).collect();
        for (i, &b) in self.basis.iter().enumerate() {
            if b < n {
                x[b] = self.beta[i];
            }
        }
        x
    }

    /// `y = c_B B^-1`, one value per row, for the minimization form.
    pub(crate) fn row_duals(&self) -> Vec<f64> {
        let n = self.lp.n;
        (0..self.m).map(|i| (self.cost[n + i] - self.d[n + i]) / self.logical_coef[i]).collect()
    }

    pub(crate) fn reduced_costs(&self) -> Vec<f64> {
        self.d[..self.lp.n].to_vec()
    }

    pub(crate) fn structural_bounds(&self) -> (&[f64], &[f64]) {
        (&self.lb[..self.lp.n], &self.ub[..self.lp.n])
    }

    /// `sum_i y_i M_i` over every column of `[A | L | R]`, from the original data.
    fn combine(&self, y: &[f64]) -> Vec<f64> {
        let (m, n) = (self.m, self.lp.n);
        let mut c = vec![0.0; self.ncols];
        for (i, row) in self.lp.rows.iter().enumerate() {
            if y[i] != 0.0 {
                for &(j, a) in row {
                    c[j] += y[i] * a;
                }
                c[n + i] += y[i] * self.logical_coef[i];
            }
        }
        for (k, &(row, coef)) in self.artificials.iter().enumerate() {
            c[n + m + k] += y[row] * coef;
        }
        c
    }

    /// Range of `sum c_j x_j` over the current bounds. Coefficients below `tiny`
    /// are ignored on unbounded columns.
    fn box_range(&self, c: &[f64], tiny: f64) -> (f64, f64) {
        let (mut lo, mut hi) = (0.0, 0.0);
        for (j, &cj) in c.iter().enumerate() {
            if cj == 0.0 || (cj.abs() <= tiny && !(self.lb[j].is_finite() && self.ub[j].is_finite())) {
                continue;
            }
            let (a, b) = (cj * self.lb[j], cj * self.ub[j]);
            lo += a.min(b);
            hi += a.max(b);
        }
        (lo, hi)
    }

    /// Whether row `r` of `B^-1`, applied to the original rows, proves that no
    /// point within the bounds satisfies them.
    fn certifies_infeasible(&self, r: usize) -> bool {
        let y: Vec<f64> = (0..self.m).map(|i| self.binv(r, i)).collect();
        let c = self.combine(&y);
        let rhs: f64 = y.iter().zip(&self.lp.rhs).map(|(a, b)| a * b).sum();
        let (lo, hi) = self.box_range(&c, 1e-9);
        let scale = 1.0 + y.iter().zip(&self.lp.rhs).map(|(a, b)| (a * b).abs()).sum::<f64>();
        rhs > hi + FEAS_TOL * scale || rhs < lo - FEAS_TOL * scale
    }

    /// Lagrangian lower bound from the current row duals, with reduced costs
    /// taken from the original data. Any multipliers give a valid bound, so it
    /// holds however inaccurate the tableau is.
    pub(crate) fn lagrangian_bound(&self) -> f64 {
        let y = self.row_duals();
        let mut d = self.combine(&y);
        for (dj, cj) in d.iter_mut().zip(&self.cost) {
            *dj = cj - *dj;
        }
        let yb: f64 = y.iter().zip(&self.lp.rhs).map(|(a, b)| a * b).sum();
        yb + self.box_range(&d, OPT_TOL).0
    }

    /// Largest violation of a row or bound by the current primal values,
    /// measured against the original data.
    pub(crate) fn primal_violation(&self) -> f64 {
        let x = self.primal_values();
        let mut worst = 0.0f64;
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lb[j] - v).max(v - self.ub[j]);
        }
        for (i, row) in self.lp.rows.iter().enumerate() {
            let ax: f64 = row.iter().map(|&(j, a)| a * x[j]).sum();
            let r = ax - self.lp.rhs[i];
            let v = match self.lp.relations[i] {
                Relation::Le => r,
                Relation::Ge => -r,
                Relation::Eq => r.abs(),
            };
            worst = worst.max(v);
        }
        worst
    }
}
