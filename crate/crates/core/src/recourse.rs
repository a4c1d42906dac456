//! Operations-only evaluation with fixed investments.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::GridCase;
use crate::scenario::ScenarioSet;
use crate::tep::{operate, InvestmentState, PlanConfig, PlanSolution, UpgradeData};

/// A node counts as curtailing on a day above this many pu·h.
pub const CURTAIL_EPS_PUH: f64 = 1e-3;
/// A node counts as shedding on a day above this many pu·h (solver noise floor).
pub const SHED_EPS_PUH: f64 = 1e-6;
/// A branch is congested when its flow is within this many pu of its limit.
pub const CONGESTION_TOL_PU: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecourseReport {
    pub base_mva: f64,
    pub hours: usize,
    pub days_per_year: f64,
    pub labels: Vec<String>,
    pub weights: Vec<f64>,
    pub bus_ids: Vec<i64>,
    pub branch_ids: Vec<i64>,
    /// Unserved energy per `[scenario][bus][t]`, MWh.
    pub shed: Vec<Vec<Vec<f64>>>,
    /// Wind and solar curtailment per `[scenario][bus][t]`, MWh.
    pub curtailed: Vec<Vec<Vec<f64>>>,
    /// Flow per `[scenario][branch][t]`, MW.
    pub flow: Vec<Vec<Vec<f64>>>,
    /// Effective limit per branch including upgrades, MW (infinite if unrated).
    #[serde(with = "crate::grid::unbounded::above_vec")]
    pub limit: Vec<f64>,
    pub congested: Vec<Vec<Vec<bool>>>,
    pub objective: f64,
    pub genex: f64,
    pub penalty_cost: f64,
}

fn sum2(v: &[Vec<f64>]) -> f64 {
    v.iter().flatten().sum()
}

impl RecourseReport {
    /// Per-slot diagnostics of a decoded solution.
    pub fn from_solution(case: &GridCase, scenarios: &ScenarioSet, config: &PlanConfig, sol: &PlanSolution) -> Self {
        let pu = case.per_unit();
        let up = UpgradeData::new(case, config);
        let limit_pu: Vec<f64> = case
            .branches
            .iter()
            .enumerate()
            .map(|(l, br)| br.thermal_limit + sol.investments.upgrades[l] as f64 * up.delta[l])
            .collect();
        let mut shed = Vec::new();
        let mut curtailed = Vec::new();
        let mut flow = Vec::new();
        let mut congested = Vec::new();
        for (sch, sc) in sol.schedule.scenarios.iter().zip(&scenarios.scenarios) {
            shed.push(
                sch.shed
                    .iter()
                    .map(|row| row.iter().map(|&v| pu.to_mw(v.max(0.0)) + 0.0).collect())
                    .collect(),
            );
            let mut cur = vec![vec![0.0; scenarios.hours]; case.buses.len()];
            for (g, gen) in case.generators.iter().enumerate() {
                if !gen.kind.is_variable() {
                    continue;
                }
                for t in 0..scenarios.hours {
                    cur[gen.bus][t] += pu.to_mw((sc.gen_max[g][t] - sch.pg[g][t]).max(0.0));
                }
            }
            curtailed.push(cur);
            flow.push(
                sch.pf
                    .iter()
                    .map(|row| row.iter().map(|&v| pu.to_mw(v)).collect())
                    .collect(),
            );
            congested.push(
                sch.pf
                    .iter()
                    .zip(&limit_pu)
                    .map(|(row, &lim)| {
                        row.iter()
                            .map(|&f| lim.is_finite() && f.abs() >= lim - CONGESTION_TOL_PU)
                            .collect()
                    })
                    .collect(),
            );
        }
        RecourseReport {
            base_mva: case.base_mva,
            hours: scenarios.hours,
            days_per_year: config.days_per_year,
            labels: scenarios.scenarios.iter().map(|s| s.label.clone()).collect(),
            weights: scenarios.scenarios.iter().map(|s| s.weight).collect(),
            bus_ids: case.buses.iter().map(|b| b.id).collect(),
            branch_ids: case.branches.iter().map(|b| b.id).collect(),
            shed,
            curtailed,
            flow,
            limit: limit_pu.iter().map(|&l| pu.to_mw(l)).collect(),
            congested,
            objective: sol.total_cost(),
            genex: sol.genex,
            penalty_cost: sol.penalty_cost,
        }
    }

    pub fn scenarios(&self) -> usize {
        self.labels.len()
    }

    /// Shed of `bus` summed over the hours of scenario `s`, MWh.
    pub fn day_shed(&self, s: usize, bus: usize) -> f64 {
        self.shed[s][bus].iter().sum()
    }

    pub fn day_curtailed(&self, s: usize, bus: usize) -> f64 {
        self.curtailed[s][bus].iter().sum()
    }

    pub fn sheds_on(&self, s: usize, bus: usize) -> bool {
        self.day_shed(s, bus) > SHED_EPS_PUH * self.base_mva
    }

    pub fn curtails_on(&self, s: usize, bus: usize) -> bool {
        self.day_curtailed(s, bus) > CURTAIL_EPS_PUH * self.base_mva
    }

    fn annual(&self, per_day: impl Fn(usize) -> f64) -> f64 {
        (0..self.scenarios())
            .map(|s| self.days_per_year * self.weights[s] * per_day(s))
            .sum()
    }

    /// Annual shed per bus, MWh.
    pub fn node_shed(&self) -> Vec<f64> {
        (0..self.bus_ids.len())
            .map(|i| self.annual(|s| self.day_shed(s, i)))
            .collect()
    }

    pub fn node_curtailed(&self) -> Vec<f64> {
        (0..self.bus_ids.len())
            .map(|i| self.annual(|s| self.day_curtailed(s, i)))
            .collect()
    }

    /// Annual system shed, MWh.
    pub fn total_shed(&self) -> f64 {
        self.annual(|s| sum2(&self.shed[s]))
    }

    pub fn total_curtailed(&self) -> f64 {
        self.annual(|s| sum2(&self.curtailed[s]))
    }

    /// Number of congested (scenario, hour) slots per branch.
    pub fn congested_hours(&self) -> Vec<usize> {
        (0..self.branch_ids.len())
            .map(|l| {
                self.congested
                    .iter()
                    .map(|sc| sc[l].iter().filter(|&&c| c).count())
                    .sum()
            })
            .collect()
    }

    /// Node-hour table: scenario, label, weight, hour, bus, shed and curtailment.
    pub fn write_node_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["scenario", "label", "weight", "hour", "bus_id", "shed_mwh", "curtailed_mwh"])?;
        for s in 0..self.scenarios() {
            for t in 0..self.hours {
                for (i, id) in self.bus_ids.iter().enumerate() {
                    out.write_record([
                        s.to_string(),
                        self.labels[s].clone(),
                        self.weights[s].to_string(),
                        t.to_string(),
                        id.to_string(),
                        self.shed[s][i][t].to_string(),
                        self.curtailed[s][i][t].to_string(),
                    ])?;
                }
            }
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Branch-hour table with flows, limits and congestion flags.
    pub fn write_branch_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["scenario", "hour", "branch_id", "flow_mw", "limit_mw", "congested"])?;
        for s in 0..self.scenarios() {
            for t in 0..self.hours {
                for (l, id) in self.branch_ids.iter().enumerate() {
                    out.write_record([
                        s.to_string(),
                        t.to_string(),
                        id.to_string(),
                        self.flow[s][l][t].to_string(),
                        self.limit[l].to_string(),
                        self.congested[s][l][t].to_string(),
                    ])?;
                }
            }
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Solves operations with `investments` fixed and reports per-slot diagnostics.
pub fn evaluate(
    case: &GridCase,
    scenarios: &ScenarioSet,
    config: &PlanConfig,
    investments: &InvestmentState,
) -> Result<RecourseReport> {
    Ok(evaluate_full(case, scenarios, config, investments)?.0)
}

/// Like [`evaluate`], also returning the decoded operations.
pub fn evaluate_full(
    case: &GridCase,
    scenarios: &ScenarioSet,
    config: &PlanConfig,
    investments: &InvestmentState,
) -> Result<(RecourseReport, PlanSolution)> {
    let sol = operate(case, scenarios, config, investments)?;
    let report = RecourseReport::from_solution(case, scenarios, config, &sol);
    Ok((report, sol))
}
