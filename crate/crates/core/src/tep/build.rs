//! Assembly of the transmission+storage MILP.

use std::collections::BTreeSet;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{Configuration, PlanConfig};
use crate::error::{Error, Result};
use crate::grid::GridCase;
use crate::milp::{MilpModel, Sense, VarId, VarKind};
use crate::scenario::ScenarioSet;

/// Investment decisions in physical units, indexed like the case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvestmentState {
    /// Upgrade level per branch.
    pub upgrades: Vec<u32>,
    /// Storage installed per bus.
    pub storage: Vec<bool>,
    pub power_mw: Vec<f64>,
    pub energy_mwh: Vec<f64>,
}

impl InvestmentState {
    pub fn none(case: &GridCase) -> Self {
        let n = case.buses.len();
        InvestmentState {
            upgrades: vec![0; case.branches.len()],
            storage: vec![false; n],
            power_mw: vec![0.0; n],
            energy_mwh: vec![0.0; n],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.upgrades.iter().all(|&g| g == 0) && !self.storage.iter().any(|&s| s)
    }

    pub fn storage_sites(&self) -> Vec<usize> {
        (0..self.storage.len()).filter(|&i| self.storage[i]).collect()
    }

    pub fn validate(&self, case: &GridCase, config: &PlanConfig) -> Result<()> {
        let n = case.buses.len();
        if self.upgrades.len() != case.branches.len()
            || self.storage.len() != n
            || self.power_mw.len() != n
            || self.energy_mwh.len() != n
        {
            return Err(Error::Invalid("investment state does not match the case dimensions".into()));
        }
        if let Some(l) = self.upgrades.iter().position(|&g| g > config.upgrade_levels) {
            return Err(Error::Invalid(format!(
                "branch {} upgraded {} levels, more than {}",
                case.branches[l].id, self.upgrades[l], config.upgrade_levels
            )));
        }
        for i in 0..n {
            let (p, e) = (self.power_mw[i], self.energy_mwh[i]);
            if !(p >= 0.0 && e >= 0.0 && p.is_finite() && e.is_finite()) {
                return Err(Error::Invalid(format!("bus {}: negative storage rating", case.buses[i].id)));
            }
            if !self.storage[i] && (p > 0.0 || e > 0.0) {
                return Err(Error::Invalid(format!(
                    "bus {}: storage ratings without an installed unit",
                    case.buses[i].id
                )));
            }
            if e > config.storage_max_duration_h * p * (1.0 + 1e-9) + 1e-6 {
                return Err(Error::Invalid(format!(
                    "bus {}: {e} MWh exceeds the duration cap for {p} MW",
                    case.buses[i].id
                )));
            }
        }
        Ok(())
    }

    /// Elementwise maximum, used to carry decisions between stages.
    pub fn merge_max(&self, other: &InvestmentState) -> InvestmentState {
        InvestmentState {
            upgrades: self.upgrades.iter().zip(&other.upgrades).map(|(a, b)| *a.max(b)).collect(),
            storage: self.storage.iter().zip(&other.storage).map(|(a, b)| *a || *b).collect(),
            power_mw: self.power_mw.iter().zip(&other.power_mw).map(|(a, b)| a.max(*b)).collect(),
            energy_mwh: self.energy_mwh.iter().zip(&other.energy_mwh).map(|(a, b)| a.max(*b)).collect(),
        }
    }
}

/// Per-level capacity and cost of upgrading each branch.
#[derive(Debug, Clone, PartialEq)]
pub struct UpgradeData {
    /// Added capacity per level, pu. Zero for unrated branches.
    pub delta: Vec<f64>,
    /// Cost per level, $.
    pub cost: Vec<f64>,
}

impl UpgradeData {
    pub fn new(case: &GridCase, config: &PlanConfig) -> Self {
        let pu = case.per_unit();
        let mut delta = Vec::with_capacity(case.branches.len());
        let mut cost = Vec::with_capacity(case.branches.len());
        for br in &case.branches {
            if br.is_rated() {
                let d = config.upgrade_fraction * br.thermal_limit;
                delta.push(d);
                cost.push(config.line_cost_per_mw_km * pu.to_mw(d) * br.length_km);
            } else {
                delta.push(0.0);
                cost.push(0.0);
            }
        }
        UpgradeData { delta, cost }
    }
}

/// Capital cost of `state` in $, split into (lines, storage).
pub fn capex(case: &GridCase, config: &PlanConfig, state: &InvestmentState) -> (f64, f64) {
    let up = UpgradeData::new(case, config);
    let lines = state
        .upgrades
        .iter()
        .zip(&up.cost)
        .map(|(&g, &c)| g as f64 * c)
        .sum();
    let (fixed, per_mw, per_mwh) = config.storage_costs();
    let storage = (0..state.storage.len())
        .filter(|&i| state.storage[i])
        .map(|i| fixed + per_mw * state.power_mw[i] + per_mwh * state.energy_mwh[i])
        .sum();
    (lines, storage)
}

/// Storage variables of one site for one scenario, indexed by hour.
#[derive(Debug, Clone, Default)]
pub struct StorageOps {
    pub ch: Vec<VarId>,
    pub dis: Vec<VarId>,
    pub soc: Vec<VarId>,
    pub alpha: Vec<VarId>,
    pub beta: Vec<VarId>,
}

/// Operational variables of one scenario; inner vectors are indexed by hour.
#[derive(Debug, Clone, Default)]
pub struct ScenarioVars {
    pub pg: Vec<Vec<VarId>>,
    pub theta: Vec<Vec<VarId>>,
    pub pf: Vec<Vec<VarId>>,
    /// Unserved load (negative part of the balance slack).
    pub shed: Vec<Vec<VarId>>,
    /// Over-served energy (positive part of the balance slack).
    pub over: Vec<Vec<VarId>>,
    /// Per storage site, in the order of [`TepModel::storage_buses`].
    pub storage: Vec<StorageOps>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuildMode {
    /// Investments are decisions, bounded below by any carried state.
    Plan,
    /// Investments are fixed; only operations are optimized.
    Fixed,
}

/// A built model plus the variable layout needed to decode it.
#[derive(Debug, Clone)]
pub struct TepModel {
    pub model: MilpModel,
    pub mode: BuildMode,
    pub configuration: Configuration,
    pub hours: usize,
    /// Upgrade variable per branch, absent when lines cannot be upgraded.
    pub gamma: Vec<Option<VarId>>,
    pub storage_buses: Vec<usize>,
    pub sigma: Vec<VarId>,
    pub power: Vec<VarId>,
    pub energy: Vec<VarId>,
    pub scenarios: Vec<ScenarioVars>,
    /// State the model was bounded below by (plan) or fixed to (fixed).
    pub base: InvestmentState,
    pub upgrade: UpgradeData,
}

impl TepModel {
    /// Binary variables belonging to storage siting and operation.
    pub fn storage_binaries(&self) -> usize {
        let ops: usize = self
            .scenarios
            .iter()
            .flat_map(|s| &s.storage)
            .map(|o| o.alpha.len())
            .sum();
        self.sigma.len() + ops
    }
}

/// Storage binaries for `sites` candidate buses, `k` scenarios of `hours` each.
pub fn storage_binary_count(sites: usize, k: usize, hours: usize) -> usize {
    sites * (1 + k * hours)
}

struct Builder<'a> {
    case: &'a GridCase,
    scenarios: &'a ScenarioSet,
    config: &'a PlanConfig,
    m: MilpModel,
}

/// Builds the planning model. `carry` bounds every investment from below and
/// its capital cost is removed from the objective.
pub fn build_model(
    case: &GridCase,
    scenarios: &ScenarioSet,
    config: &PlanConfig,
    candidates: &BTreeSet<usize>,
    carry: Option<&InvestmentState>,
) -> Result<TepModel> {
    let mut cands = candidates.clone();
    if !config.configuration.allows_storage() && !cands.is_empty() {
        warn!(
            "{} candidate buses ignored: configuration {} has no storage",
            cands.len(),
            config.configuration
        );
        cands.clear();
    }
    build(case, scenarios, config, BuildMode::Plan, &cands, carry)
}

/// Builds the operations-only model with every investment fixed.
pub fn build_fixed_model(
    case: &GridCase,
    scenarios: &ScenarioSet,
    config: &PlanConfig,
    investments: &InvestmentState,
) -> Result<TepModel> {
    build(case, scenarios, config, BuildMode::Fixed, &BTreeSet::new(), Some(investments))
}

fn build(
    case: &GridCase,
    scenarios: &ScenarioSet,
    config: &PlanConfig,
    mode: BuildMode,
    candidates: &BTreeSet<usize>,
    carry: Option<&InvestmentState>,
) -> Result<TepModel> {
    config.validate()?;
    case.validate()?;
    scenarios.validate(case)?;
    let n = case.buses.len();
    if let Some(&i) = candidates.iter().find(|&&i| i >= n) {
        return Err(Error::Build(format!("candidate bus index {i} has no scenario data ({n} buses)")));
    }
    let base = match carry {
        Some(c) => {
            c.validate(case, config)?;
            c.clone()
        }
        None => InvestmentState::none(case),
    };
    let storage_buses: Vec<usize> = candidates
        .iter()
        .copied()
        .chain(base.storage_sites())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let mut b = Builder {
        case,
        scenarios,
        config,
        m: MilpModel::new(format!("tep_{}", config.configuration)),
    };
    let upgrade = UpgradeData::new(case, config);
    let fixed = mode == BuildMode::Fixed;
    let lines_free = !fixed && config.configuration.allows_lines();
    let storage_free = !fixed && config.configuration.allows_storage();

    let gamma = b.gamma_vars(&base, &upgrade, lines_free);
    let (sigma, power, energy) = b.storage_vars(&storage_buses, &base, storage_free);
    let per_scenario = (0..scenarios.len())
        .map(|s| b.scenario(s, &base, &upgrade, &gamma, &storage_buses, &power, &energy))
        .collect();

    // Carried or fixed capital is sunk: cancel what the lower bounds force.
    let sunk_lines: f64 = gamma
        .iter()
        .enumerate()
        .filter(|(_, g)| g.is_some())
        .map(|(l, _)| base.upgrades[l] as f64 * upgrade.cost[l])
        .sum();
    let (_, sunk_storage) = capex(case, config, &base);
    b.m.objective_constant -= sunk_lines + sunk_storage;

    Ok(TepModel {
        model: b.m,
        mode,
        configuration: config.configuration,
        hours: scenarios.hours,
        gamma,
        storage_buses,
        sigma,
        power,
        energy,
        scenarios: per_scenario,
        base,
        upgrade,
    })
}

impl Builder<'_> {
    fn gamma_vars(
        &mut self,
        base: &InvestmentState,
        upgrade: &UpgradeData,
        free: bool,
    ) -> Vec<Option<VarId>> {
        let levels = self.config.upgrade_levels;
        self.case
            .branches
            .iter()
            .enumerate()
            .map(|(l, br)| {
                if !free || levels == 0 || !br.is_rated() {
                    return None;
                }
                let lo = base.upgrades[l] as f64;
                Some(self.m.add_var(
                    format!("gamma_{}", br.id),
                    lo,
                    levels as f64,
                    VarKind::Integer,
                    upgrade.cost[l],
                ))
            })
            .collect()
    }

    fn storage_vars(
        &mut self,
        sites: &[usize],
        base: &InvestmentState,
        free: bool,
    ) -> (Vec<VarId>, Vec<VarId>, Vec<VarId>) {
        let pu = self.case.per_unit();
        let p_cap = pu.to_pu(self.config.storage_max_power_mw);
        let e_cap = pu.to_pu(self.config.storage_max_energy_mwh);
        let (fixed_cost, per_mw, per_mwh) = self.config.storage_costs();
        let mut sigma = Vec::with_capacity(sites.len());
        let mut power = Vec::with_capacity(sites.len());
        let mut energy = Vec::with_capacity(sites.len());
        for &i in sites {
            let id = self.case.buses[i].id;
            let s0 = if base.storage[i] { 1.0 } else { 0.0 };
            let p0 = pu.to_pu(base.power_mw[i]);
            let e0 = pu.to_pu(base.energy_mwh[i]);
            let (s_hi, p_hi, e_hi) = if free {
                (1.0, p_cap.max(p0), e_cap.max(e0))
            } else {
                (s0, p0, e0)
            };
            let sv = self.m.add_var(format!("sigma_{id}"), s0, s_hi, VarKind::Binary, fixed_cost);
            let pv = self
                .m
                .add_var(format!("spr_{id}"), p0, p_hi, VarKind::Continuous, pu.to_mw(per_mw));
            let ev = self
                .m
                .add_var(format!("ser_{id}"), e0, e_hi, VarKind::Continuous, pu.to_mw(per_mwh));
            if free {
                self.m.add_constraint(format!("ercap_{id}"), [(ev, 1.0), (sv, -e_cap.max(e0))], Sense::Le, 0.0);
                self.m.add_constraint(format!("prcap_{id}"), [(pv, 1.0), (sv, -p_cap.max(p0))], Sense::Le, 0.0);
                self.m.add_constraint(
                    format!("dur_{id}"),
                    [(ev, 1.0), (pv, -self.config.storage_max_duration_h)],
                    Sense::Le,
                    0.0,
                );
            }
            sigma.push(sv);
            power.push(pv);
            energy.push(ev);
        }
        (sigma, power, energy)
    }

    #[allow(clippy::too_many_arguments)]
    fn scenario(
        &mut self,
        s: usize,
        base: &InvestmentState,
        upgrade: &UpgradeData,
        gamma: &[Option<VarId>],
        sites: &[usize],
        power: &[VarId],
        energy: &[VarId],
    ) -> ScenarioVars {
        let case = self.case;
        let cfg = self.config;
        let sc = &self.scenarios.scenarios[s];
        let hours = self.scenarios.hours;
        let pu = case.per_unit();
        let year_weight = cfg.days_per_year * sc.weight;
        let penalty = year_weight * pu.to_mw(cfg.penalty_per_mwh);
        let p_cap = pu.to_pu(cfg.storage_max_power_mw);
        let eta = cfg.efficiency;
        let mut v = ScenarioVars::default();

        for (g, gen) in case.generators.iter().enumerate() {
            let row = (0..hours)
                .map(|t| {
                    let hi = sc.gen_max[g][t];
                    let lo = if gen.kind.is_renewable() { 0.0 } else { gen.p_min.min(hi) };
                    self.m.objective_constant += year_weight * gen.cost_fixed;
                    self.m.add_var(
                        format!("pg_{}_{s}_{t}", gen.id),
                        lo,
                        hi,
                        VarKind::Continuous,
                        year_weight * pu.to_mw(gen.cost_linear),
                    )
                })
                .collect();
            v.pg.push(row);
        }
        for (i, bus) in case.buses.iter().enumerate() {
            // Lowest-index bus is the angle reference.
            let (lo, hi) = if i == 0 { (0.0, 0.0) } else { (f64::NEG_INFINITY, f64::INFINITY) };
            v.theta.push(
                (0..hours)
                    .map(|t| self.m.continuous(format!("th_{}_{s}_{t}", bus.id), lo, hi))
                    .collect(),
            );
            v.shed.push(
                (0..hours)
                    .map(|t| {
                        self.m
                            .add_var(format!("shed_{}_{s}_{t}", bus.id), 0.0, f64::INFINITY, VarKind::Continuous, penalty)
                    })
                    .collect(),
            );
            v.over.push(
                (0..hours)
                    .map(|t| {
                        self.m
                            .add_var(format!("over_{}_{s}_{t}", bus.id), 0.0, f64::INFINITY, VarKind::Continuous, penalty)
                    })
                    .collect(),
            );
        }
        for (l, br) in case.branches.iter().enumerate() {
            let mut row = Vec::with_capacity(hours);
            for t in 0..hours {
                let limit = br.thermal_limit + base.upgrades[l] as f64 * upgrade.delta[l];
                let (lo, hi) = match gamma[l] {
                    Some(_) => (f64::NEG_INFINITY, f64::INFINITY),
                    None => (-limit, limit),
                };
                let pf = self.m.continuous(format!("pf_{}_{s}_{t}", br.id), lo, hi);
                let (thi, thj) = (v.theta[br.from_bus][t], v.theta[br.to_bus][t]);
                let inv_x = 1.0 / br.reactance;
                self.m.add_constraint(
                    format!("ohm_{}_{s}_{t}", br.id),
                    [(pf, 1.0), (thj, -inv_x), (thi, inv_x)],
                    Sense::Eq,
                    0.0,
                );
                if let Some(gv) = gamma[l] {
                    let d = upgrade.delta[l];
                    self.m.add_constraint(
                        format!("fmax_{}_{s}_{t}", br.id),
                        [(pf, 1.0), (gv, -d)],
                        Sense::Le,
                        br.thermal_limit,
                    );
                    self.m.add_constraint(
                        format!("fmin_{}_{s}_{t}", br.id),
                        [(pf, -1.0), (gv, -d)],
                        Sense::Le,
                        br.thermal_limit,
                    );
                }
                if br.angle_max.is_finite() {
                    self.m.add_constraint(
                        format!("angmax_{}_{s}_{t}", br.id),
                        [(thj, 1.0), (thi, -1.0)],
                        Sense::Le,
                        br.angle_max,
                    );
                }
                if br.angle_min.is_finite() {
                    self.m.add_constraint(
                        format!("angmin_{}_{s}_{t}", br.id),
                        [(thj, 1.0), (thi, -1.0)],
                        Sense::Ge,
                        br.angle_min,
                    );
                }
                row.push(pf);
            }
            v.pf.push(row);
        }
        for (k, &i) in sites.iter().enumerate() {
            let id = case.buses[i].id;
            let mut ops = StorageOps::default();
            for t in 0..hours {
                let name = |p: &str| format!("{p}_{id}_{s}_{t}");
                let ch = self.m.continuous(name("ch"), 0.0, f64::INFINITY);
                let dis = self.m.continuous(name("dis"), 0.0, f64::INFINITY);
                let soc = self.m.continuous(name("soc"), 0.0, f64::INFINITY);
                let alpha = self.m.binary(name("alpha"));
                let beta = self.m.continuous(name("beta"), 0.0, f64::INFINITY);
                let (pr, er) = (power[k], energy[k]);
                self.m.add_constraint(name("socmax"), [(soc, 1.0), (er, -1.0)], Sense::Le, 0.0);
                self.m.add_constraint(name("chlin"), [(ch, eta), (beta, -1.0)], Sense::Le, 0.0);
                self.m.add_constraint(
                    name("dislin"),
                    [(dis, 1.0 / eta), (beta, 1.0), (pr, -1.0)],
                    Sense::Le,
                    0.0,
                );
                self.m.add_constraint(name("betaa"), [(beta, 1.0), (alpha, -p_cap)], Sense::Le, 0.0);
                self.m.add_constraint(name("betapr"), [(beta, 1.0), (pr, -1.0)], Sense::Le, 0.0);
                self.m.add_constraint(
                    name("betab"),
                    [(pr, 1.0), (beta, -1.0), (alpha, p_cap)],
                    Sense::Le,
                    p_cap,
                );
                if t == 0 {
                    self.m.add_constraint(
                        name("soc"),
                        [(soc, 1.0), (er, -0.5), (ch, -eta), (dis, 1.0 / eta)],
                        Sense::Eq,
                        0.0,
                    );
                } else {
                    self.m.add_constraint(
                        name("soc"),
                        [(soc, 1.0), (ops.soc[t - 1], -1.0), (ch, -eta), (dis, 1.0 / eta)],
                        Sense::Eq,
                        0.0,
                    );
                }
                if t + 1 == hours {
                    self.m.add_constraint(name("socend"), [(soc, 1.0), (er, -0.5)], Sense::Eq, 0.0);
                }
                ops.ch.push(ch);
                ops.dis.push(dis);
                ops.soc.push(soc);
                ops.alpha.push(alpha);
                ops.beta.push(beta);
            }
            v.storage.push(ops);
        }

        // Nodal balance: generation + inflow - outflow + dis - ch - (over - shed) = load.
        let gens_at = case.generators_by_bus();
        let mut incident: Vec<Vec<(usize, f64)>> = vec![Vec::new(); case.buses.len()];
        for (l, br) in case.branches.iter().enumerate() {
            incident[br.to_bus].push((l, 1.0));
            incident[br.from_bus].push((l, -1.0));
        }
        for (i, bus) in case.buses.iter().enumerate() {
            for t in 0..hours {
                let mut terms: Vec<(VarId, f64)> = gens_at[i].iter().map(|&g| (v.pg[g][t], 1.0)).collect();
                terms.extend(incident[i].iter().map(|&(l, sign)| (v.pf[l][t], sign)));
                if let Ok(k) = sites.binary_search(&i) {
                    terms.push((v.storage[k].dis[t], 1.0));
                    terms.push((v.storage[k].ch[t], -1.0));
                }
                terms.push((v.over[i][t], -1.0));
                terms.push((v.shed[i][t], 1.0));
                self.m
                    .add_constraint(format!("bal_{}_{s}_{t}", bus.id), terms, Sense::Eq, sc.load[i][t]);
            }
        }
        v
    }
}
