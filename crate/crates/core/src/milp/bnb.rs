//! Best-bound branch-and-bound over LP relaxations.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;
use std::time::Instant;

use log::debug;

use super::model::{check_point, MilpModel};
use super::simplex::{solve_lp, Basis, LpData, LpError, LpSolution, LpStatus};
use super::{SolveOptions, SolveResult, SolveStatus};
use crate::error::{Error, Result};

/// Smallest gap tolerance the search honors; ties below it are not explored.
pub const MIN_GAP: f64 = 1e-9;

struct Node {
    /// Quantized bound used for ordering; ties go deeper first, then older.
    key: i64,
    bound: f64,
    depth: usize,
    id: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    basis: Arc<Basis>,
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
    // BinaryHeap is a max-heap: "greater" means popped first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .cmp(&self.key)
            .then(self.depth.cmp(&other.depth))
            .then(other.id.cmp(&self.id))
    }
}

struct Search<'a> {
    model: &'a MilpModel,
    data: LpData,
    options: &'a SolveOptions,
    integer: Vec<usize>,
    incumbent: Option<(f64, Vec<f64>)>,
    pruned_bound: f64,
    next_id: usize,
    lp_iterations: usize,
    key_scale: f64,
}

fn gap(incumbent: f64, bound: f64) -> f64 {
    ((incumbent - bound) / incumbent.abs().max(1.0)).max(0.0)
}

impl<'a> Search<'a> {
    fn tolerance(&self) -> f64 {
        self.options.mip_gap.max(MIN_GAP)
    }

    fn cutoff(&self) -> f64 {
        match &self.incumbent {
            Some((obj, _)) => obj - self.tolerance() * obj.abs().max(1.0),
            None => f64::INFINITY,
        }
    }

    fn key(&self, bound: f64) -> i64 {
        // 1e-9 relative buckets relative to the root bound magnitude.
        let q = bound / self.key_scale * 1e9;
        q.floor().clamp(i64::MIN as f64, i64::MAX as f64) as i64
    }

    fn lp(
        &mut self,
        lower: &[f64],
        upper: &[f64],
        warm: Option<&Basis>,
    ) -> Result<(LpSolution, Basis)> {
        let out = solve_lp(&self.data, lower, upper, warm).map_err(|e| match e {
            LpError::IterationLimit => Error::Solver("simplex iteration limit".into()),
        })?;
        self.lp_iterations += out.0.iterations;
        Ok(out)
    }

    /// Branching variable: the most fractional among priced integers (the
    /// investment decisions), else the most fractional overall.
    fn most_fractional(&self, x: &[f64]) -> Option<usize> {
        let mut best = [None, None];
        let mut best_frac = [self.options.int_tol; 2];
        for &j in &self.integer {
            let f = x[j] - x[j].floor();
            let frac = f.min(1.0 - f);
            let tier = usize::from(self.model.variables[j].cost == 0.0);
            if frac > best_frac[tier] {
                best_frac[tier] = frac;
                best[tier] = Some(j);
            }
        }
        best[0].or(best[1])
    }

    fn offer(&mut self, x: &[f64]) -> bool {
        let mut x = x.to_vec();
        for &j in &self.integer {
            x[j] = x[j].round();
        }
        let v = check_point(self.model, &x);
        if !v.within(self.options.feas_tol, self.options.int_tol) {
            debug!("rejected candidate incumbent: {v:?}");
            return false;
        }
        let obj = self.model.objective_value(&x);
        let better = self.incumbent.as_ref().is_none_or(|(best, _)| obj < *best);
        if better {
            debug!("new incumbent {obj}");
            self.incumbent = Some((obj, x));
        }
        better
    }

    /// Fixes one variable at a time to its nearest integer and re-solves.
    fn dive(&mut self, lower: &[f64], upper: &[f64], root: &LpSolution, basis: &Basis) -> Result<()> {
        let mut lo = lower.to_vec();
        let mut hi = upper.to_vec();
        let mut x = root.x.clone();
        let mut basis = basis.clone();
        let mut obj = root.objective;
        for _ in 0..self.integer.len() {
            if obj >= self.cutoff() {
                return Ok(());
            }
            // Least fractional first.
            let mut pick = None;
            let mut best = f64::INFINITY;
            for &j in &self.integer {
                let f = (x[j] - x[j].round()).abs();
                if f > self.options.int_tol && f < best && lo[j] < hi[j] {
                    best = f;
                    pick = Some(j);
                }
            }
            let Some(j) = pick else {
                self.offer(&x);
                return Ok(());
            };
            // Both roundings are tried; the cheaper relaxation wins.
            let near = x[j].round();
            let far = if near > x[j] { near - 1.0 } else { near + 1.0 };
            let (l0, h0) = (lo[j], hi[j]);
            let mut best_side: Option<(f64, LpSolution, Basis)> = None;
            for v in [near, far] {
                if v < l0 || v > h0 {
                    continue;
                }
                lo[j] = v;
                hi[j] = v;
                let (sol, b) = self.lp(&lo, &hi, Some(&basis))?;
                if sol.status == LpStatus::Optimal
                    && best_side.as_ref().is_none_or(|(_, s, _)| sol.objective < s.objective)
                {
                    best_side = Some((v, sol, b));
                }
            }
            let moved = match best_side {
                Some((v, sol, b)) => {
                    lo[j] = v;
                    hi[j] = v;
                    x = sol.x;
                    obj = sol.objective;
                    basis = b;
                    true
                }
                None => false,
            };
            if !moved {
                return Ok(());
            }
        }
        Ok(())
    }

    fn push_child(
        &mut self,
        heap: &mut BinaryHeap<Node>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        depth: usize,
        parent: &Basis,
    ) -> Result<()> {
        let (sol, basis) = self.lp(&lower, &upper, Some(parent))?;
        match sol.status {
            LpStatus::Infeasible => return Ok(()),
            LpStatus::Unbounded => {
                return Err(Error::Solver("unbounded relaxation below a bounded root".into()))
            }
            LpStatus::Optimal => {}
        }
        if sol.objective >= self.cutoff() {
            self.pruned_bound = self.pruned_bound.min(sol.objective);
            return Ok(());
        }
        if self.most_fractional(&sol.x).is_none() {
            if !self.offer(&sol.x) {
                return Err(Error::Solver("integral relaxation failed feasibility check".into()));
            }
            return Ok(());
        }
        let id = self.next_id;
        self.next_id += 1;
        heap.push(Node {
            key: self.key(sol.objective),
            bound: sol.objective,
            depth,
            id,
            lower,
            upper,
            x: sol.x,
            basis: Arc::new(basis),
        });
        Ok(())
    }

    fn result(&self, status: SolveStatus, bound: f64, nodes: usize) -> SolveResult {
        let (objective, primal) = match &self.incumbent {
            Some((o, x)) => (*o, x.clone()),
            None => (f64::NAN, Vec::new()),
        };
        let bound = if objective.is_finite() {
            bound.min(objective)
        } else {
            bound
        };
        SolveResult {
            status,
            objective,
            primal,
            bound,
            gap: if objective.is_finite() {
                gap(objective, bound)
            } else {
                f64::INFINITY
            },
            nodes,
            lp_iterations: self.lp_iterations,
        }
    }
}

pub fn branch_and_bound(model: &MilpModel, options: &SolveOptions) -> Result<SolveResult> {
    model.validate()?;
    options.validate()?;
    let start = Instant::now();
    let data = LpData::new(model);
    let mut lower: Vec<f64> = Vec::with_capacity(model.num_vars());
    let mut upper: Vec<f64> = Vec::with_capacity(model.num_vars());
    let mut integer = Vec::new();
    for (j, v) in model.variables.iter().enumerate() {
        if v.kind.is_integral() {
            integer.push(j);
            lower.push((v.lower - options.int_tol).ceil());
            upper.push((v.upper + options.int_tol).floor());
        } else {
            lower.push(v.lower);
            upper.push(v.upper);
        }
    }
    let mut search = Search {
        model,
        data,
        options,
        integer,
        incumbent: None,
        pruned_bound: f64::INFINITY,
        next_id: 0,
        lp_iterations: 0,
        key_scale: 1.0,
    };
    if lower.iter().zip(&upper).any(|(l, u)| l > u) {
        return Ok(search.result(SolveStatus::Infeasible, f64::INFINITY, 0));
    }

    let (root, root_basis) = search.lp(&lower, &upper, None)?;
    match root.status {
        LpStatus::Infeasible => return Ok(search.result(SolveStatus::Infeasible, f64::INFINITY, 1)),
        LpStatus::Unbounded => {
            return Ok(search.result(SolveStatus::Unbounded, f64::NEG_INFINITY, 1))
        }
        LpStatus::Optimal => {}
    }
    search.key_scale = root.objective.abs().max(1.0);
    debug!(
        "root LP {} after {} iterations ({} rows, {} cols, {} integer)",
        root.objective,
        root.iterations,
        search.data.m,
        search.data.n_struct,
        search.integer.len()
    );
    if search.most_fractional(&root.x).is_none() {
        if !search.offer(&root.x) {
            return Err(Error::Solver("root solution failed feasibility check".into()));
        }
        return Ok(search.result(SolveStatus::Optimal, root.objective, 1));
    }
    search.dive(&lower, &upper, &root, &root_basis)?;

    let mut heap = BinaryHeap::new();
    heap.push(Node {
        key: search.key(root.objective),
        bound: root.objective,
        depth: 0,
        id: 0,
        lower,
        upper,
        x: root.x,
        basis: Arc::new(root_basis),
    });
    search.next_id = 1;
    let mut nodes = 1usize;

    loop {
        let open_bound = heap.peek().map_or(f64::INFINITY, |n| n.bound);
        let bound = open_bound.min(search.pruned_bound);
        if let Some((inc, _)) = &search.incumbent {
            if heap.is_empty() || gap(*inc, bound) <= search.tolerance() {
                return Ok(search.result(SolveStatus::Optimal, bound, nodes));
            }
        } else if heap.is_empty() {
            return Ok(search.result(SolveStatus::Infeasible, f64::INFINITY, nodes));
        }
        if let Some(limit) = options.time_limit {
            if start.elapsed().as_secs_f64() > limit {
                return Ok(search.result(SolveStatus::TimeLimit, bound, nodes));
            }
        }
        if nodes >= options.node_limit {
            return Ok(search.result(SolveStatus::GapLimit, bound, nodes));
        }

        let node = heap.pop().expect("nonempty heap");
        if node.bound >= search.cutoff() {
            search.pruned_bound = search.pruned_bound.min(node.bound);
            continue;
        }
        let Some(j) = search.most_fractional(&node.x) else {
            continue;
        };
        nodes += 1;
        let v = node.x[j];
        let mut down_hi = node.upper.clone();
        down_hi[j] = v.floor();
        search.push_child(&mut heap, node.lower.clone(), down_hi, node.depth + 1, &node.basis)?;
        let mut up_lo = node.lower;
        up_lo[j] = v.ceil();
        search.push_child(&mut heap, up_lo, node.upper, node.depth + 1, &node.basis)?;
    }
}
