//! Bounded-variable revised primal simplex.
//!
//! Rows `a_i x {<=,=,>=} b_i` get one slack each so that the system becomes
//! `A x + s = b` with every column carrying its own bounds. The basis inverse is
//! a sparse eta file (see [`super::factor`]) with periodic reinversion. Phase 1
//! minimizes the sum of bound violations of the basic variables, so any
//! nonsingular starting basis works; branch-and-bound children restart from
//! their parent's basis this way.

use super::factor::{reinvert, Factor};
use super::model::{MilpModel, Sense};

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 100;
const STALL_LIMIT: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    AtZero,
}

/// A basis: the basic column of each row plus the status of every column.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Basis {
    pub head: Vec<usize>,
    pub status: Vec<VarStatus>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub(crate) struct LpSolution {
    pub status: LpStatus,
    /// Structural variable values (length = model variables).
    pub x: Vec<f64>,
    /// Objective in model units, including the constant.
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug)]
pub(crate) enum LpError {
    IterationLimit,
}

/// Column-major constraint data in standard form, shared by every node.
#[derive(Debug)]
pub(crate) struct LpData {
    pub m: usize,
    pub n_struct: usize,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    b: Vec<f64>,
    /// Normalized costs, length `n_struct` (slacks cost nothing).
    cost: Vec<f64>,
    raw_cost: Vec<f64>,
    constant: f64,
    slack_lower: Vec<f64>,
    slack_upper: Vec<f64>,
    /// Structural nonzeros per row.
    row_count: Vec<usize>,
}

impl LpData {
    pub fn new(model: &MilpModel) -> Self {
        let m = model.constraints.len();
        let n_struct = model.variables.len();
        let mut counts = vec![0usize; n_struct];
        for c in &model.constraints {
            for &(v, _) in &c.terms {
                counts[v.0] += 1;
            }
        }
        let mut col_start = vec![0usize; n_struct + 1];
        for j in 0..n_struct {
            col_start[j + 1] = col_start[j] + counts[j];
        }
        let nnz = col_start[n_struct];
        let mut col_row = vec![0usize; nnz];
        let mut col_val = vec![0f64; nnz];
        let mut fill = col_start.clone();
        let mut b = Vec::with_capacity(m);
        let mut slack_lower = Vec::with_capacity(m);
        let mut slack_upper = Vec::with_capacity(m);
        for (i, c) in model.constraints.iter().enumerate() {
            for &(v, a) in &c.terms {
                col_row[fill[v.0]] = i;
                col_val[fill[v.0]] = a;
                fill[v.0] += 1;
            }
            b.push(c.rhs);
            let (lo, hi) = match c.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            slack_lower.push(lo);
            slack_upper.push(hi);
        }
        let mut row_count = vec![0usize; m];
        for &r in &col_row {
            row_count[r] += 1;
        }
        let raw_cost: Vec<f64> = model.variables.iter().map(|v| v.cost).collect();
        let scale = raw_cost.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        let cost_scale = if scale > 0.0 { scale } else { 1.0 };
        let cost = raw_cost.iter().map(|c| c / cost_scale).collect();
        LpData {
            m,
            n_struct,
            col_start,
            col_row,
            col_val,
            b,
            cost,
            raw_cost,
            constant: model.objective_constant,
            slack_lower,
            slack_upper,
            row_count,
        }
    }

    pub fn n(&self) -> usize {
        self.n_struct + self.m
    }

    /// Full bound vectors (structural then slack) for the given structural bounds.
    pub fn full_bounds(&self, lower: &[f64], upper: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut lo = lower.to_vec();
        lo.extend_from_slice(&self.slack_lower);
        let mut hi = upper.to_vec();
        hi.extend_from_slice(&self.slack_upper);
        (lo, hi)
    }

    #[inline]
    fn for_col(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.n_struct {
            for k in self.col_start[j]..self.col_start[j + 1] {
                f(self.col_row[k], self.col_val[k]);
            }
        } else {
            f(j - self.n_struct, 1.0);
        }
    }

    fn col_nnz(&self, j: usize) -> usize {
        if j < self.n_struct {
            self.col_start[j + 1] - self.col_start[j]
        } else {
            1
        }
    }

    #[inline]
    fn dot_col(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n_struct {
            let mut s = 0.0;
            for k in self.col_start[j]..self.col_start[j + 1] {
                s += self.col_val[k] * y[self.col_row[k]];
            }
            s
        } else {
            y[j - self.n_struct]
        }
    }

    #[inline]
    fn cost(&self, j: usize) -> f64 {
        if j < self.n_struct {
            self.cost[j]
        } else {
            0.0
        }
    }

    /// Slack basis with structurals at a finite bound (or zero if free).
    pub fn slack_basis(&self, lower: &[f64], upper: &[f64]) -> Basis {
        let mut status = Vec::with_capacity(self.n());
        for j in 0..self.n_struct {
            status.push(nonbasic_status(lower[j], upper[j]));
        }
        status.extend(std::iter::repeat(VarStatus::Basic).take(self.m));
        Basis {
            head: (self.n_struct..self.n()).collect(),
            status,
        }
    }
}

fn nonbasic_status(lo: f64, hi: f64) -> VarStatus {
    if lo.is_finite() {
        VarStatus::AtLower
    } else if hi.is_finite() {
        VarStatus::AtUpper
    } else {
        VarStatus::AtZero
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Phase {
    One,
    Two,
}

pub(crate) struct Simplex<'a> {
    data: &'a LpData,
    lower: Vec<f64>,
    upper: Vec<f64>,
    head: Vec<usize>,
    status: Vec<VarStatus>,
    factor: Factor,
    x: Vec<f64>,
    since_refactor: usize,
    /// Eta nonzeros right after the last reinversion.
    base_nnz: usize,
    iterations: usize,
    max_iterations: usize,
    degenerate_run: usize,
    bland: bool,
    // scratch
    y: Vec<f64>,
    alpha: Vec<f64>,
}

impl<'a> Simplex<'a> {
    /// `lower`/`upper` are structural bounds; slack bounds come from `data`.
    pub fn new(data: &'a LpData, lower: &[f64], upper: &[f64], basis: Basis) -> Self {
        let (lower, upper) = data.full_bounds(lower, upper);
        let m = data.m;
        let n = data.n();
        let mut s = Simplex {
            data,
            lower,
            upper,
            head: basis.head,
            status: basis.status,
            factor: Factor::identity(m),
            x: vec![0.0; n],
            since_refactor: 0,
            base_nnz: 0,
            iterations: 0,
            max_iterations: 50 * (m + n) + 1000,
            degenerate_run: 0,
            bland: false,
            y: vec![0.0; m],
            alpha: vec![0.0; m],
        };
        // Nonbasic statuses must be consistent with (possibly tightened) bounds.
        for j in 0..n {
            if s.status[j] != VarStatus::Basic {
                let (lo, hi) = (s.lower[j], s.upper[j]);
                s.status[j] = match s.status[j] {
                    VarStatus::AtLower if lo.is_finite() => VarStatus::AtLower,
                    VarStatus::AtUpper if hi.is_finite() => VarStatus::AtUpper,
                    _ => nonbasic_status(lo, hi),
                };
            }
        }
        s
    }

    pub fn basis(&self) -> Basis {
        Basis {
            head: self.head.clone(),
            status: self.status.clone(),
        }
    }

    pub fn solve(&mut self) -> Result<LpSolution, LpError> {
        self.refactor()?;
        self.recompute_x();
        loop {
            if self.has_infeasibility() {
                if !self.run(Phase::One)? {
                    return Ok(self.finish(LpStatus::Infeasible));
                }
            }
            match self.run_phase_two()? {
                Some(status) => return Ok(self.finish(status)),
                None => continue,
            }
        }
    }

    /// Returns `Some(status)` when done, `None` if drift made the point infeasible.
    fn run_phase_two(&mut self) -> Result<Option<LpStatus>, LpError> {
        let bounded = self.run(Phase::Two)?;
        if !bounded {
            return Ok(Some(LpStatus::Unbounded));
        }
        self.refactor()?;
        self.recompute_x();
        if self.has_infeasibility() {
            return Ok(None);
        }
        Ok(Some(LpStatus::Optimal))
    }

    fn finish(&self, status: LpStatus) -> LpSolution {
        let x: Vec<f64> = self.x[..self.data.n_struct].to_vec();
        let objective = self.data.constant
            + x.iter()
                .zip(&self.data.raw_cost)
                .map(|(a, c)| a * c)
                .sum::<f64>();
        LpSolution {
            status,
            x,
            objective,
            iterations: self.iterations,
        }
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        let tol = PRIMAL_TOL * (1.0 + v.abs());
        if v < self.lower[j] - tol {
            -1.0
        } else if v > self.upper[j] + tol {
            1.0
        } else {
            0.0
        }
    }

    fn has_infeasibility(&self) -> bool {
        self.head.iter().any(|&j| self.infeasibility(j) != 0.0)
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.status[j] {
            VarStatus::AtLower => self.lower[j],
            VarStatus::AtUpper => self.upper[j],
            VarStatus::AtZero => 0.0,
            VarStatus::Basic => unreachable!(),
        }
    }

    /// Rebuilds the eta file; dependent columns are swapped for slacks.
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.data.m;
        self.since_refactor = 0;
        let data = self.data;
        let out = reinvert(
            m,
            data.n_struct,
            &self.head,
            &data.row_count,
            |j| data.col_nnz(j),
            |j, v| data.for_col(j, |r, a| v[r] = a),
        );
        for &j in &out.dropped {
            self.status[j] = nonbasic_status(self.lower[j], self.upper[j]);
            self.x[j] = self.nonbasic_value(j);
        }
        if !out.dropped.is_empty() {
            log::debug!("reinversion dropped {} dependent column(s)", out.dropped.len());
        }
        for &j in &out.head {
            self.status[j] = VarStatus::Basic;
        }
        self.head = out.head;
        self.factor = out.factor;
        self.base_nnz = self.factor.nnz();
        Ok(())
    }

    fn recompute_x(&mut self) {
        let m = self.data.m;
        let n = self.data.n();
        let mut r = self.data.b.clone();
        for j in 0..n {
            if self.status[j] == VarStatus::Basic {
                continue;
            }
            let v = self.nonbasic_value(j);
            self.x[j] = v;
            if v != 0.0 {
                self.data.for_col(j, |i, a| r[i] -= a * v);
            }
        }
        self.factor.ftran(&mut r);
        for i in 0..m {
            self.x[self.head[i]] = r[i];
        }
    }

    /// y = c_B^T B^{-1} for the current phase's basic costs.
    fn compute_duals(&mut self, phase: Phase) {
        for i in 0..self.data.m {
            let j = self.head[i];
            self.y[i] = match phase {
                Phase::One => self.infeasibility(j),
                Phase::Two => self.data.cost(j),
            };
        }
        self.factor.btran(&mut self.y);
    }

    /// Picks an entering column and its direction (+1 increase, -1 decrease).
    fn price(&self, phase: Phase) -> Option<(usize, f64)> {
        let n = self.data.n();
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..n {
            let st = self.status[j];
            if st == VarStatus::Basic || self.lower[j] == self.upper[j] {
                continue;
            }
            let c = match phase {
                Phase::One => 0.0,
                Phase::Two => self.data.cost(j),
            };
            let d = c - self.data.dot_col(j, &self.y);
            let dir = match st {
                VarStatus::AtLower if d < -DUAL_TOL => 1.0,
                VarStatus::AtUpper if d > DUAL_TOL => -1.0,
                VarStatus::AtZero if d < -DUAL_TOL => 1.0,
                VarStatus::AtZero if d > DUAL_TOL => -1.0,
                _ => continue,
            };
            if self.bland {
                return Some((j, dir));
            }
            if d.abs() > best_score {
                best_score = d.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    fn compute_alpha(&mut self, q: usize) {
        self.alpha.iter_mut().for_each(|v| *v = 0.0);
        let alpha = &mut self.alpha;
        self.data.for_col(q, |k, a| alpha[k] = a);
        self.factor.ftran(&mut self.alpha);
    }

    /// Runs one phase to completion. Returns false on an unbounded ray
    /// (phase 2) or on proven infeasibility (phase 1).
    fn run(&mut self, phase: Phase) -> Result<bool, LpError> {
        loop {
            if phase == Phase::One && !self.has_infeasibility() {
                return Ok(true);
            }
            self.iterations += 1;
            if self.iterations > self.max_iterations {
                return Err(LpError::IterationLimit);
            }
            self.compute_duals(phase);
            let Some((q, dir)) = self.price(phase) else {
                if phase == Phase::One {
                    // Confirm on a fresh factorization before declaring infeasible.
                    if self.since_refactor > 0 {
                        self.refactor()?;
                        self.recompute_x();
                        continue;
                    }
                    return Ok(false);
                }
                return Ok(true);
            };
            self.compute_alpha(q);

            // Ratio test.
            let m = self.data.m;
            let mut step = f64::INFINITY;
            let mut leave: Option<(usize, VarStatus)> = None;
            let mut leave_pivot = 0.0;
            for i in 0..m {
                let a = self.alpha[i];
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let j = self.head[i];
                let rate = -dir * a;
                let (lo, hi, xj) = (self.lower[j], self.upper[j], self.x[j]);
                let infeas = if phase == Phase::One {
                    self.infeasibility(j)
                } else {
                    0.0
                };
                let (limit, to) = if infeas < 0.0 {
                    if rate > 0.0 {
                        ((lo - xj) / rate, VarStatus::AtLower)
                    } else {
                        continue;
                    }
                } else if infeas > 0.0 {
                    if rate < 0.0 {
                        ((hi - xj) / rate, VarStatus::AtUpper)
                    } else {
                        continue;
                    }
                } else if rate < 0.0 {
                    if lo.is_finite() {
                        (((xj - lo) / -rate).max(0.0), VarStatus::AtLower)
                    } else {
                        continue;
                    }
                } else if hi.is_finite() {
                    (((hi - xj) / rate).max(0.0), VarStatus::AtUpper)
                } else {
                    continue;
                };
                let better = if self.bland {
                    limit < step
                        || (limit == step
                            && leave.is_some_and(|(r, _)| self.head[i] < self.head[r]))
                } else {
                    limit < step - 1e-12 || (limit <= step + 1e-12 && a.abs() > leave_pivot)
                };
                if better {
                    step = limit;
                    leave = Some((i, to));
                    leave_pivot = a.abs();
                }
            }
            let span = self.upper[q] - self.lower[q];
            let flip = span.is_finite() && span <= step;
            if flip {
                step = span;
            } else if leave.is_none() {
                if phase == Phase::Two {
                    return Ok(false);
                }
                // Phase 1 should always be bounded; treat as numerical trouble.
                self.refactor()?;
                self.recompute_x();
                self.bland = true;
                continue;
            }

            if step <= 1e-12 {
                self.degenerate_run += 1;
                if self.degenerate_run > STALL_LIMIT {
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
                self.bland = false;
            }

            // Move.
            if step > 0.0 {
                for i in 0..m {
                    let a = self.alpha[i];
                    if a != 0.0 {
                        let j = self.head[i];
                        self.x[j] -= dir * a * step;
                    }
                }
                self.x[q] += dir * step;
            }
            if flip {
                self.status[q] = if dir > 0.0 {
                    VarStatus::AtUpper
                } else {
                    VarStatus::AtLower
                };
                self.x[q] = self.nonbasic_value(q);
                continue;
            }
            let (r, to) = leave.expect("leaving row");
            self.pivot(q, r, to);
            let grown = self.factor.nnz() > 2 * self.base_nnz + 10 * self.data.m;
            if self.since_refactor >= REFACTOR_EVERY || grown {
                self.refactor()?;
                self.recompute_x();
            }
        }
    }

    fn pivot(&mut self, q: usize, r: usize, to: VarStatus) {
        let out = self.head[r];
        self.status[out] = to;
        self.x[out] = self.nonbasic_value(out);
        self.status[q] = VarStatus::Basic;
        self.head[r] = q;
        self.factor.push(r, &self.alpha);
        self.since_refactor += 1;
    }
}

/// Solves the LP relaxation under the given bounds, optionally warm-started.
pub(crate) fn solve_lp(
    data: &LpData,
    lower: &[f64],
    upper: &[f64],
    warm: Option<&Basis>,
) -> Result<(LpSolution, Basis), LpError> {
    if let Some(b) = warm {
        let mut s = Simplex::new(data, lower, upper, b.clone());
        match s.solve() {
            Ok(sol) => return Ok((sol, s.basis())),
            Err(LpError::IterationLimit) => {
                log::debug!("warm start failed; falling back to slack basis");
            }
        }
    }
    let basis = data.slack_basis(lower, upper);
    let mut s = Simplex::new(data, lower, upper, basis);
    let sol = s.solve()?;
    Ok((sol, s.basis()))
}
