//! The two-stage transmission+storage expansion model.

mod build;
mod config;
mod decode;

use std::collections::BTreeSet;

use log::info;

pub use build::{
    build_fixed_model, build_model, capex, storage_binary_count, BuildMode, InvestmentState,
    ScenarioVars, StorageOps, TepModel, UpgradeData,
};
pub use config::{Configuration, PlanConfig, SolverConfig};
pub use decode::{
    decode_solution, summarize, OperationSchedule, PlanSolution, ScenarioSchedule, SolveSummary,
    StorageSchedule, OBJECTIVE_CHECK_TOL,
};

use crate::error::{Error, Result};
use crate::grid::GridCase;
use crate::milp::{self, MilpModel, SolveResult};
use crate::scenario::ScenarioSet;

/// Solves with the built-in solver, or the external one for large models.
pub fn solve_model(model: &MilpModel, solver: &SolverConfig) -> Result<SolveResult> {
    match &solver.external {
        Some(cmd) if model.num_vars() >= solver.external_min_vars => {
            info!("solving {} with external solver `{cmd}`", model.name);
            milp::solve_external(model, cmd)
        }
        _ => milp::solve(model, &solver.options),
    }
}

fn require_solution(result: &SolveResult) -> Result<()> {
    if result.status.has_solution() {
        Ok(())
    } else {
        Err(Error::Solver(format!("model is {}", result.status.as_str())))
    }
}

/// Builds, solves and decodes one planning problem.
pub fn plan(
    case: &GridCase,
    scenarios: &ScenarioSet,
    config: &PlanConfig,
    candidates: &BTreeSet<usize>,
    carry: Option<&InvestmentState>,
) -> Result<PlanSolution> {
    let tep = build_model(case, scenarios, config, candidates, carry)?;
    info!(
        "{}: {} variables, {} rows, {} binaries ({} storage)",
        tep.model.name,
        tep.model.num_vars(),
        tep.model.constraints.len(),
        tep.model.num_binary(),
        tep.storage_binaries()
    );
    let result = solve_model(&tep.model, &config.solver)?;
    require_solution(&result)?;
    decode_solution(&tep, case, scenarios, config, &result)
}

/// Optimizes operations only, with `investments` fixed.
pub fn operate(
    case: &GridCase,
    scenarios: &ScenarioSet,
    config: &PlanConfig,
    investments: &InvestmentState,
) -> Result<PlanSolution> {
    let tep = build_fixed_model(case, scenarios, config, investments)?;
    let result = solve_model(&tep.model, &config.solver)?;
    if !result.status.has_solution() {
        // Balance slacks make every fixed model feasible.
        return Err(Error::Solver(format!(
            "operations model reported {}; this indicates a modelling bug",
            result.status.as_str()
        )));
    }
    decode_solution(&tep, case, scenarios, config, &result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GeneratorKind;
    use crate::milp::{SolveOptions, SolveStatus};
    use crate::testkit::{bus, gen, line, scenarios_from};

    fn exact(mut cfg: PlanConfig) -> PlanConfig {
        cfg.solver.options = SolveOptions::exact();
        cfg
    }

    fn island() -> GridCase {
        GridCase {
            base_mva: 100.0,
            buses: vec![bus(1, 0.8)],
            branches: vec![],
            generators: vec![gen(1, 0, GeneratorKind::NaturalGas, 1.0, 20.0)],
        }
    }

    #[test]
    fn island_dispatches_its_load() {
        let case = island();
        let sc = ScenarioSet::constant(&case, 1);
        let sol = plan(&case, &sc, &exact(PlanConfig::default()), &BTreeSet::new(), None).unwrap();
        let s = &sol.schedule.scenarios[0];
        assert!((s.pg[0][0] - 0.8).abs() < 1e-9);
        assert!(s.shed[0][0].abs() < 1e-9 && s.over[0][0].abs() < 1e-9);
        // 80 MW at $20/MWh for one hour, 365 times.
        assert!((sol.genex - 365.0 * 80.0 * 20.0).abs() < 1e-6);
        assert_eq!(sol.load_shed, 0.0);
    }

    #[test]
    fn zero_load_gives_zero_costs() {
        let mut case = island();
        case.buses[0].load = 0.0;
        case.generators[0].cost_fixed = 0.0;
        let sc = ScenarioSet::constant(&case, 3);
        let sol = plan(&case, &sc, &exact(PlanConfig::default()), &BTreeSet::new(), None).unwrap();
        assert_eq!(sol.total_cost(), 0.0);
        assert!(sol.schedule.scenarios[0].pg[0].iter().all(|&p| p == 0.0));
    }

    /// Bus 1 has cheap generation, bus 2 has load beyond the line rating.
    fn two_bus(load2: f64, length_km: f64) -> GridCase {
        GridCase {
            base_mva: 100.0,
            buses: vec![bus(1, 0.0), bus(2, load2)],
            branches: vec![line(1, 0, 1, 0.1, 1.0, length_km)],
            generators: vec![gen(1, 0, GeneratorKind::Coal, 5.0, 10.0)],
        }
    }

    #[test]
    fn upgrade_chosen_when_cheaper_than_shedding() {
        let case = two_bus(1.2, 10.0);
        let sc = ScenarioSet::constant(&case, 1);
        let cfg = exact(PlanConfig::default().with_configuration(Configuration::TepOnly));
        let sol = plan(&case, &sc, &cfg, &BTreeSet::new(), None).unwrap();
        // One level adds 30 MW for 1243 * 30 * 10 $; shedding 20 MW costs 365 * 20 * 2.5M.
        assert_eq!(sol.investments.upgrades, vec![1]);
        assert!((sol.capex_lines - 1243.0 * 30.0 * 10.0).abs() < 1e-6);
        assert!(sol.load_shed.abs() < 1e-6);
    }

    #[test]
    fn shedding_chosen_when_upgrade_is_dearer() {
        let case = two_bus(1.2, 10.0);
        let sc = ScenarioSet::constant(&case, 1);
        let mut cfg = exact(PlanConfig::default().with_configuration(Configuration::TepOnly));
        cfg.penalty_per_mwh = 20.0;
        let sol = plan(&case, &sc, &cfg, &BTreeSet::new(), None).unwrap();
        assert_eq!(sol.investments.upgrades, vec![0]);
        assert!((sol.load_shed - 365.0 * 20.0).abs() < 1e-6);
    }

    #[test]
    fn forced_shed_penalty_arithmetic() {
        // 1 MW of load and nothing to serve it: 1 MWh shed every hour.
        let case = GridCase {
            base_mva: 100.0,
            buses: vec![bus(1, 0.01)],
            branches: vec![],
            generators: vec![],
        };
        let sc = ScenarioSet::constant(&case, 24);
        let sol = plan(&case, &sc, &exact(PlanConfig::default()), &BTreeSet::new(), None).unwrap();
        assert_eq!(sol.penalty_cost, 365.0 * 2.5e6 * 24.0);
        assert!((sol.load_shed - 365.0 * 24.0).abs() < 1e-9);
    }

    #[test]
    fn storage_shifts_cheap_energy() {
        // Cheap generation in hour 0, expensive afterwards.
        let mut case = island();
        case.generators.push(gen(2, 0, GeneratorKind::NaturalGas, 1.0, 1000.0));
        let mut sc = ScenarioSet::constant(&case, 4);
        sc.scenarios[0].gen_max[0] = vec![1.0, 0.0, 0.0, 0.0];
        let carry = InvestmentState {
            upgrades: vec![],
            storage: vec![true],
            power_mw: vec![10.0],
            energy_mwh: vec![40.0],
        };
        let sol = operate(&case, &sc, &exact(PlanConfig::default()), &carry).unwrap();
        let st = &sol.schedule.scenarios[0].storage[0];
        assert!(st.ch[0] > 0.0);
        for t in 0..4 {
            assert!(st.ch[t].min(st.dis[t]) <= 1e-6);
            let prev = if t == 0 { 0.2 } else { st.soc[t - 1] };
            let resid = st.soc[t] - prev - 0.95 * st.ch[t] + st.dis[t] / 0.95;
            assert!(resid.abs() < 1e-9);
        }
        assert!((st.soc[3] - 0.2).abs() < 1e-9);
        assert_eq!(sol.capex_storage, 0.0);
    }

    #[test]
    fn charging_ten_mwh_gains_nine_and_a_half() {
        let case = island();
        let sc = ScenarioSet::constant(&case, 2);
        let tep = build_fixed_model(
            &case,
            &sc,
            &PlanConfig::default(),
            &InvestmentState {
                upgrades: vec![],
                storage: vec![true],
                power_mw: vec![20.0],
                energy_mwh: vec![40.0],
            },
        )
        .unwrap();
        let m = &tep.model;
        let ops = &tep.scenarios[0].storage[0];
        let row = m
            .constraints
            .iter()
            .find(|c| c.name == "soc_1_0_1")
            .unwrap();
        // soc_1 - soc_0 - 0.95 ch_1 + dis_1/0.95 = 0 with ch_1 = 0.1 pu.
        let mut x = vec![0.0; m.num_vars()];
        x[ops.ch[1].0] = 0.1;
        x[ops.soc[0].0] = 0.2;
        x[ops.soc[1].0] = 0.2 + 0.095;
        assert!(row.activity(&x).abs() < 1e-15);
        assert!((crate::grid::PerUnit { base_mva: 100.0 }.to_mw(0.095) - 9.5).abs() < 1e-12);
    }

    #[test]
    fn binary_count_formula() {
        let case = two_bus(0.5, 10.0);
        let mut sc = ScenarioSet::constant(&case, 24);
        let mut second = sc.scenarios[0].clone();
        sc.scenarios[0].weight = 0.5;
        second.weight = 0.5;
        sc.scenarios.push(second);
        let cands: BTreeSet<usize> = [0, 1].into();
        let tep = build_model(&case, &sc, &PlanConfig::default(), &cands, None).unwrap();
        assert_eq!(tep.storage_binaries(), storage_binary_count(2, 2, 24));
        assert_eq!(storage_binary_count(147, 1, 24), 3675);
    }

    #[test]
    fn tep_only_ignores_candidates() {
        let case = two_bus(0.5, 10.0);
        let sc = ScenarioSet::constant(&case, 2);
        let cfg = PlanConfig::default().with_configuration(Configuration::TepOnly);
        let tep = build_model(&case, &sc, &cfg, &[1].into(), None).unwrap();
        assert!(tep.storage_buses.is_empty());
        assert!(tep.gamma[0].is_some());
        let cfg = PlanConfig::default().with_configuration(Configuration::StorageOnly);
        let tep = build_model(&case, &sc, &cfg, &[1].into(), None).unwrap();
        assert_eq!(tep.storage_buses, vec![1]);
        assert!(tep.gamma[0].is_none());
        assert!(build_model(&case, &sc, &cfg, &[5].into(), None).is_err());
    }

    #[test]
    fn carried_capex_is_not_charged_again() {
        let case = two_bus(1.2, 10.0);
        let sc = ScenarioSet::constant(&case, 1);
        let cfg = exact(PlanConfig::default().with_configuration(Configuration::TepOnly));
        let mut carry = InvestmentState::none(&case);
        carry.upgrades[0] = 1;
        let sol = plan(&case, &sc, &cfg, &BTreeSet::new(), Some(&carry)).unwrap();
        assert_eq!(sol.investments.upgrades, vec![1]);
        assert_eq!(sol.capex_lines, 0.0);
    }

    #[test]
    fn decode_rejects_objective_drift() {
        let case = island();
        let sc = ScenarioSet::constant(&case, 1);
        let cfg = exact(PlanConfig::default());
        let tep = build_model(&case, &sc, &cfg, &BTreeSet::new(), None).unwrap();
        let mut r = milp::solve(&tep.model, &cfg.solver.options).unwrap();
        decode_solution(&tep, &case, &sc, &cfg, &r).unwrap();
        r.objective *= 1.001;
        assert!(matches!(decode_solution(&tep, &case, &sc, &cfg, &r), Err(Error::Decode(_))));
        r.status = SolveStatus::Infeasible;
        assert!(decode_solution(&tep, &case, &sc, &cfg, &r).is_err());
    }

    #[test]
    fn scenario_helper_shapes() {
        let case = two_bus(0.5, 10.0);
        let sc = scenarios_from(&case, &[(1.0, vec![vec![0.0], vec![0.3]], vec![vec![1.0]])]);
        sc.validate(&case).unwrap();
    }
}
