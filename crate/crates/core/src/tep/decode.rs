//! Turning solver primals back into investments, schedules and costs.

use serde::{Deserialize, Serialize};

use super::build::{capex, BuildMode, InvestmentState, TepModel};
use super::{Configuration, PlanConfig};
use crate::error::{Error, Result};
use crate::grid::GridCase;
use crate::milp::{SolveResult, SolveStatus, VarId};
use crate::scenario::ScenarioSet;

/// Relative tolerance for matching the decoded cost to the solver objective.
pub const OBJECTIVE_CHECK_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageSchedule {
    pub ch: Vec<f64>,
    pub dis: Vec<f64>,
    pub soc: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

/// Hourly operations of one scenario, in per-unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSchedule {
    pub label: String,
    pub weight: f64,
    /// `[generator][t]`
    pub pg: Vec<Vec<f64>>,
    /// `[branch][t]`
    pub pf: Vec<Vec<f64>>,
    /// `[bus][t]`
    pub theta: Vec<Vec<f64>>,
    pub shed: Vec<Vec<f64>>,
    pub over: Vec<Vec<f64>>,
    /// Per storage site, ordered like [`OperationSchedule::storage_buses`].
    pub storage: Vec<StorageSchedule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperationSchedule {
    pub hours: usize,
    pub storage_buses: Vec<usize>,
    pub scenarios: Vec<ScenarioSchedule>,
}

/// Solver outcome without the primal vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub status: SolveStatus,
    pub objective: f64,
    pub bound: f64,
    pub gap: f64,
    pub nodes: usize,
    pub lp_iterations: usize,
    pub variables: usize,
    pub constraints: usize,
    pub binaries: usize,
    pub storage_binaries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSolution {
    pub configuration: Configuration,
    pub mode: BuildMode,
    /// Cumulative investments, including anything carried in.
    pub investments: InvestmentState,
    /// Investments the model started from.
    pub carried: InvestmentState,
    pub schedule: OperationSchedule,
    /// Incremental line capital cost, $.
    pub capex_lines: f64,
    /// Incremental storage capital cost, $.
    pub capex_storage: f64,
    /// Annual generation cost, $.
    pub genex: f64,
    /// Annual penalty on shed and over-served energy, $.
    pub penalty_cost: f64,
    /// Annual unserved energy, MWh.
    pub load_shed: f64,
    /// Annual over-served energy, MWh.
    pub over_supply: f64,
    /// Annual wind and solar curtailment, MWh.
    pub curtailment: f64,
    pub solver: SolveSummary,
}

impl PlanSolution {
    pub fn total_cost(&self) -> f64 {
        self.capex_lines + self.capex_storage + self.genex + self.penalty_cost
    }
}

fn values(x: &[f64], vars: &[VarId]) -> Vec<f64> {
    vars.iter().map(|v| x[v.0]).collect()
}

fn grid(x: &[f64], vars: &[Vec<VarId>]) -> Vec<Vec<f64>> {
    vars.iter().map(|row| values(x, row)).collect()
}

pub fn summarize(tep: &TepModel, result: &SolveResult) -> SolveSummary {
    SolveSummary {
        status: result.status,
        objective: result.objective,
        bound: result.bound,
        gap: result.gap,
        nodes: result.nodes,
        lp_iterations: result.lp_iterations,
        variables: tep.model.num_vars(),
        constraints: tep.model.constraints.len(),
        binaries: tep.model.num_binary(),
        storage_binaries: tep.storage_binaries(),
    }
}

/// Decodes `result` and checks that the cost breakdown reproduces the
/// solver objective.
pub fn decode_solution(
    tep: &TepModel,
    case: &GridCase,
    scenarios: &ScenarioSet,
    config: &PlanConfig,
    result: &SolveResult,
) -> Result<PlanSolution> {
    if !result.status.has_solution() {
        return Err(Error::Decode(format!("no solution to decode (status {})", result.status.as_str())));
    }
    let x = &result.primal;
    if x.len() != tep.model.num_vars() {
        return Err(Error::Decode(format!(
            "primal has {} entries, model has {} variables",
            x.len(),
            tep.model.num_vars()
        )));
    }
    if scenarios.len() != tep.scenarios.len() || scenarios.hours != tep.hours {
        return Err(Error::Decode("scenario set differs from the one the model was built with".into()));
    }
    let pu = case.per_unit();

    let mut inv = tep.base.clone();
    for (l, g) in tep.gamma.iter().enumerate() {
        if let Some(v) = g {
            inv.upgrades[l] = x[v.0].round().max(0.0) as u32;
        }
    }
    for (k, &i) in tep.storage_buses.iter().enumerate() {
        let installed = x[tep.sigma[k].0] > 0.5;
        inv.storage[i] = installed;
        if installed {
            inv.power_mw[i] = pu.to_mw(x[tep.power[k].0].max(0.0));
            inv.energy_mwh[i] = pu.to_mw(x[tep.energy[k].0].max(0.0));
        } else {
            inv.power_mw[i] = 0.0;
            inv.energy_mwh[i] = 0.0;
        }
    }

    let (capex_lines, capex_storage) = match tep.mode {
        BuildMode::Fixed => (0.0, 0.0),
        BuildMode::Plan => {
            let (l1, s1) = capex(case, config, &inv);
            let (l0, s0) = capex(case, config, &tep.base);
            (l1 - l0, s1 - s0)
        }
    };

    let mut genex = 0.0;
    let mut shed_mwh = 0.0;
    let mut over_mwh = 0.0;
    let mut curtail_mwh = 0.0;
    let mut sched = Vec::with_capacity(scenarios.len());
    for (sv, sc) in tep.scenarios.iter().zip(&scenarios.scenarios) {
        let w = config.days_per_year * sc.weight;
        let pg = grid(x, &sv.pg);
        let shed = grid(x, &sv.shed);
        let over = grid(x, &sv.over);
        for (g, gen) in case.generators.iter().enumerate() {
            let mwh: f64 = pg[g].iter().map(|&p| pu.to_mw(p)).sum();
            genex += w * (gen.cost_linear * mwh + gen.cost_fixed * tep.hours as f64);
            if gen.kind.is_variable() {
                curtail_mwh += w * sc.gen_max[g]
                    .iter()
                    .zip(&pg[g])
                    .map(|(cap, p)| pu.to_mw((cap - p).max(0.0)))
                    .sum::<f64>();
            }
        }
        shed_mwh += w * shed.iter().flatten().map(|&v| pu.to_mw(v)).sum::<f64>();
        over_mwh += w * over.iter().flatten().map(|&v| pu.to_mw(v)).sum::<f64>();
        sched.push(ScenarioSchedule {
            label: sc.label.clone(),
            weight: sc.weight,
            pg,
            pf: grid(x, &sv.pf),
            theta: grid(x, &sv.theta),
            shed,
            over,
            storage: sv
                .storage
                .iter()
                .map(|o| StorageSchedule {
                    ch: values(x, &o.ch),
                    dis: values(x, &o.dis),
                    soc: values(x, &o.soc),
                    alpha: values(x, &o.alpha),
                    beta: values(x, &o.beta),
                })
                .collect(),
        });
    }
    let penalty_cost = config.penalty_per_mwh * (shed_mwh + over_mwh);

    let solution = PlanSolution {
        configuration: tep.configuration,
        mode: tep.mode,
        investments: inv,
        carried: tep.base.clone(),
        schedule: OperationSchedule {
            hours: tep.hours,
            storage_buses: tep.storage_buses.clone(),
            scenarios: sched,
        },
        capex_lines,
        capex_storage,
        genex,
        penalty_cost,
        load_shed: shed_mwh,
        over_supply: over_mwh,
        curtailment: curtail_mwh,
        solver: summarize(tep, result),
    };
    let total = solution.total_cost();
    let err = (total - result.objective).abs() / result.objective.abs().max(1.0);
    if !(err <= OBJECTIVE_CHECK_TOL) {
        return Err(Error::Decode(format!(
            "decoded cost {total} differs from solver objective {} (relative {err:e})",
            result.objective
        )));
    }
    Ok(solution)
}
