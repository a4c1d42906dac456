use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Continuous,
    Binary,
    Integer,
}

impl VarKind {
    pub fn is_integral(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
    /// Objective coefficient.
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    /// Sorted by variable, no duplicates, no zeros.
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, a)| a * x[v.0]).sum()
    }
}

/// A minimization MILP: variables with bounds and integrality, linear rows,
/// and a linear objective with a constant offset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MilpModel {
    pub name: String,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective_constant: f64,
}

impl MilpModel {
    pub fn new(name: impl Into<String>) -> Self {
        MilpModel {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        kind: VarKind,
        cost: f64,
    ) -> VarId {
        let (lower, upper) = match kind {
            VarKind::Binary => (lower.max(0.0), upper.min(1.0)),
            _ => (lower, upper),
        };
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
            kind,
            cost,
        });
        VarId(self.variables.len() - 1)
    }

    pub fn continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.add_var(name, lower, upper, VarKind::Continuous, 0.0)
    }

    pub fn binary(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, 0.0, 1.0, VarKind::Binary, 0.0)
    }

    pub fn set_cost(&mut self, var: VarId, cost: f64) {
        self.variables[var.0].cost = cost;
    }

    pub fn add_cost(&mut self, var: VarId, cost: f64) {
        self.variables[var.0].cost += cost;
    }

    /// Adds a row; duplicate terms are merged and exact zeros dropped.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> usize {
        let mut terms: Vec<(VarId, f64)> = terms.into_iter().collect();
        terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
        for (v, a) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += a,
                _ => merged.push((v, a)),
            }
        }
        merged.retain(|t| t.1 != 0.0);
        self.constraints.push(Constraint {
            name: name.into(),
            terms: merged,
            sense,
            rhs,
        });
        self.constraints.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_integer(&self) -> usize {
        self.variables.iter().filter(|v| v.kind.is_integral()).count()
    }

    pub fn num_binary(&self) -> usize {
        self.variables
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .count()
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_constant
            + self
                .variables
                .iter()
                .zip(x)
                .map(|(v, xi)| v.cost * xi)
                .sum::<f64>()
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = HashSet::with_capacity(self.variables.len() + self.constraints.len());
        for v in &self.variables {
            if !names.insert(v.name.as_str()) {
                return Err(Error::Invalid(format!("duplicate variable name `{}`", v.name)));
            }
            if v.lower.is_nan() || v.upper.is_nan() || !v.cost.is_finite() {
                return Err(Error::Invalid(format!("variable `{}` has NaN/inf data", v.name)));
            }
            if v.lower > v.upper {
                return Err(Error::Invalid(format!(
                    "variable `{}` has empty bounds [{}, {}]",
                    v.name, v.lower, v.upper
                )));
            }
            if v.lower == f64::INFINITY || v.upper == f64::NEG_INFINITY {
                return Err(Error::Invalid(format!("variable `{}` has infinite bound", v.name)));
            }
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(Error::Invalid(format!(
                    "binary variable `{}` has bounds outside [0, 1]",
                    v.name
                )));
            }
        }
        let mut rows = HashSet::with_capacity(self.constraints.len());
        for c in &self.constraints {
            if !rows.insert(c.name.as_str()) {
                return Err(Error::Invalid(format!("duplicate constraint name `{}`", c.name)));
            }
            if !c.rhs.is_finite() {
                return Err(Error::Invalid(format!("constraint `{}` has non-finite rhs", c.name)));
            }
            for &(v, a) in &c.terms {
                if v.0 >= self.variables.len() {
                    return Err(Error::Invalid(format!(
                        "constraint `{}` references unknown variable {}",
                        c.name, v.0
                    )));
                }
                if !a.is_finite() {
                    return Err(Error::Invalid(format!(
                        "constraint `{}` has non-finite coefficient",
                        c.name
                    )));
                }
            }
        }
        if !self.objective_constant.is_finite() {
            return Err(Error::Invalid("objective constant is not finite".into()));
        }
        Ok(())
    }
}

/// Worst violations of a point against a model.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Violation {
    pub row: f64,
    pub bound: f64,
    pub integrality: f64,
}

impl Violation {
    pub fn within(&self, feas_tol: f64, int_tol: f64) -> bool {
        self.row <= feas_tol && self.bound <= feas_tol && self.integrality <= int_tol
    }
}

/// Row-by-row evaluation of `x`, kept separate from the solver's own bookkeeping.
pub fn check_point(model: &MilpModel, x: &[f64]) -> Violation {
    let mut out = Violation::default();
    for (v, &xi) in model.variables.iter().zip(x) {
        out.bound = out.bound.max(v.lower - xi).max(xi - v.upper);
        if v.kind.is_integral() {
            out.integrality = out.integrality.max((xi - xi.round()).abs());
        }
    }
    for c in &model.constraints {
        let act = c.activity(x);
        let viol = match c.sense {
            Sense::Le => act - c.rhs,
            Sense::Ge => c.rhs - act,
            Sense::Eq => (act - c.rhs).abs(),
        };
        out.row = out.row.max(viol);
    }
    out
}
