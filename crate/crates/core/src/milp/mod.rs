//! Solver-agnostic MILP models and the solvers behind them.

mod bnb;
mod factor;
mod external;
mod model;
mod mps;
mod simplex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bnb::MIN_GAP;
pub use external::{parse_solution, solve_external};
pub use model::{check_point, Constraint, MilpModel, Sense, VarId, VarKind, Variable, Violation};
pub use mps::{read_mps, read_mps_str, write_mps, write_mps_string};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// Incumbent proven within the configured gap.
    Optimal,
    Infeasible,
    Unbounded,
    /// Node limit reached before the gap closed.
    GapLimit,
    TimeLimit,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::GapLimit => "gap_limit",
            SolveStatus::TimeLimit => "time_limit",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.trim().to_ascii_lowercase().as_str() {
            "optimal" => SolveStatus::Optimal,
            "infeasible" => SolveStatus::Infeasible,
            "unbounded" => SolveStatus::Unbounded,
            "gap_limit" => SolveStatus::GapLimit,
            "time_limit" => SolveStatus::TimeLimit,
            _ => return None,
        })
    }

    pub fn has_solution(self) -> bool {
        matches!(
            self,
            SolveStatus::Optimal | SolveStatus::GapLimit | SolveStatus::TimeLimit
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    /// Relative gap `(incumbent - bound) / max(1, |incumbent|)`.
    pub mip_gap: f64,
    /// Wall-clock limit in seconds.
    pub time_limit: Option<f64>,
    pub feas_tol: f64,
    pub int_tol: f64,
    pub node_limit: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            mip_gap: 0.01,
            time_limit: None,
            feas_tol: 1e-6,
            int_tol: 1e-6,
            node_limit: 1_000_000,
        }
    }
}

impl SolveOptions {
    pub fn exact() -> Self {
        SolveOptions {
            mip_gap: MIN_GAP,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mip_gap >= 0.0 && self.mip_gap.is_finite()) {
            return Err(Error::Parameter(format!("mip_gap must be >= 0, got {}", self.mip_gap)));
        }
        if let Some(t) = self.time_limit {
            if !(t > 0.0) {
                return Err(Error::Parameter(format!("time limit must be positive, got {t}")));
            }
        }
        if !(self.feas_tol > 0.0 && self.int_tol > 0.0 && self.int_tol < 0.5) {
            return Err(Error::Parameter("tolerances must be positive (int_tol < 0.5)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Incumbent objective; NaN when there is none.
    pub objective: f64,
    /// Incumbent point, empty when there is none.
    pub primal: Vec<f64>,
    /// Best proven lower bound.
    pub bound: f64,
    pub gap: f64,
    pub nodes: usize,
    pub lp_iterations: usize,
}

impl SolveResult {
    pub fn value(&self, var: VarId) -> f64 {
        self.primal[var.0]
    }
}

/// Solves with the built-in simplex + branch-and-bound.
pub fn solve(model: &MilpModel, options: &SolveOptions) -> Result<SolveResult> {
    bnb::branch_and_bound(model, options)
}
