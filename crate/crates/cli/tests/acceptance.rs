//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails if any
//! criterion fails. Oracles live here, independent of the crate's model code.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gridplan::candidates::{augment_candidates, select_candidates, Rule};
use gridplan::grid::{
    parse_case, scale_case, Branch, Bus, Generator, GeneratorKind, GridCase, ScalingTable,
};
use gridplan::milp::{read_mps_str, solve, solve_external, write_mps_string, SolveOptions};
use gridplan::recourse::{evaluate, evaluate_full};
use gridplan::scenario::{
    build_scenarios, cluster_days, day_features, pam, Distances, Scenario, ScenarioSet, YearSeries,
};
use gridplan::tep::{
    build_model, plan, storage_binary_count, Configuration, InvestmentState, PlanConfig,
    PlanSolution,
};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn case6_path() -> PathBuf {
    root().join("fixtures/case6/case6.m")
}

fn series6_path() -> PathBuf {
    root().join("fixtures/case6/series")
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn bus(id: i64, load_mw: f64) -> Bus {
    Bus {
        id,
        name: format!("b{id}"),
        latitude: 30.0 + 0.1 * id as f64,
        longitude: -97.0,
        area: None,
        load: load_mw / 100.0,
    }
}

fn generator(id: i64, bus: usize, kind: GeneratorKind, p_max_mw: f64, cost: f64) -> Generator {
    Generator {
        id,
        bus,
        kind,
        p_min: 0.0,
        p_max: p_max_mw / 100.0,
        cost_linear: cost,
        cost_fixed: 0.0,
    }
}

fn branch(id: i64, from: usize, to: usize, x: f64, limit_mw: f64, km: f64) -> Branch {
    Branch {
        id,
        from_bus: from,
        to_bus: to,
        reactance: x,
        thermal_limit: limit_mw / 100.0,
        length_km: km,
        angle_min: f64::NEG_INFINITY,
        angle_max: f64::INFINITY,
    }
}

/// Scenarios from MW profiles: `(weight, load[bus][t], gen_max[gen][t])`.
fn scenarios_mw(days: &[(f64, Vec<Vec<f64>>, Vec<Vec<f64>>)]) -> ScenarioSet {
    let pu = |rows: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        rows.iter().map(|r| r.iter().map(|v| v / 100.0).collect()).collect()
    };
    ScenarioSet {
        hours: days[0].1[0].len(),
        scenarios: days
            .iter()
            .enumerate()
            .map(|(d, (w, load, gmax))| Scenario {
                day: Some(d),
                label: format!("d{d}"),
                weight: *w,
                load: pu(load),
                gen_max: pu(gmax),
            })
            .collect(),
    }
}

fn exact(mut cfg: PlanConfig) -> PlanConfig {
    cfg.solver.options = SolveOptions::exact();
    cfg
}

// ---------------------------------------------------------------------------
// Brute-force oracle: one LP per fixed (upgrade, siting, mode) assignment,
// written directly in MW and $.

struct Fixture {
    case: GridCase,
    scenarios: ScenarioSet,
    config: PlanConfig,
    candidate: usize,
}

fn three_bus() -> Fixture {
    let case = GridCase {
        base_mva: 100.0,
        buses: vec![bus(1, 0.0), bus(2, 40.0), bus(3, 60.0)],
        branches: vec![branch(1, 0, 1, 0.1, 80.0, 100.0), branch(2, 1, 2, 0.1, 50.0, 80.0)],
        generators: vec![
            generator(1, 0, GeneratorKind::NaturalGas, 150.0, 20.0),
            generator(2, 1, GeneratorKind::NaturalGas, 15.0, 300.0),
        ],
    };
    let scenarios = scenarios_mw(&[(
        1.0,
        vec![vec![0.0; 4], vec![35.0, 40.0, 45.0, 40.0], vec![20.0, 30.0, 90.0, 60.0]],
        vec![vec![150.0; 4], vec![15.0; 4]],
    )]);
    let config = PlanConfig {
        penalty_per_mwh: 2000.0,
        upgrade_levels: 1,
        ..PlanConfig::default()
    };
    Fixture {
        case,
        scenarios,
        config,
        candidate: 2,
    }
}

fn oracle_lp(fx: &Fixture, gamma: &[u32], sigma: bool, alpha: &[bool]) -> Option<f64> {
    let case = &fx.case;
    let cfg = &fx.config;
    let base = case.base_mva;
    let eta = cfg.efficiency;
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let mut constant = 0.0;

    for (l, br) in case.branches.iter().enumerate() {
        let f_mw = br.thermal_limit * base;
        constant += gamma[l] as f64 * cfg.line_cost_per_mw_km * cfg.upgrade_fraction * f_mw * br.length_km;
    }
    let storage = sigma.then(|| {
        let (fixed, per_mw, per_mwh) = cfg.storage_costs();
        constant += fixed;
        let pr = p.add_var(per_mw, (0.0, cfg.storage_max_power_mw));
        let er = p.add_var(per_mwh, (0.0, cfg.storage_max_energy_mwh));
        p.add_constraint(&[(er, 1.0), (pr, -cfg.storage_max_duration_h)], ComparisonOp::Le, 0.0);
        (pr, er)
    });

    for sc in &fx.scenarios.scenarios {
        let w = cfg.days_per_year * sc.weight;
        let hours = fx.scenarios.hours;
        let mut prev_soc = None;
        for t in 0..hours {
            let n = case.buses.len();
            let mut balance: Vec<Vec<(minilp::Variable, f64)>> = vec![Vec::new(); n];
            for (g, gen) in case.generators.iter().enumerate() {
                let v = p.add_var(w * gen.cost_linear, (0.0, sc.gen_max[g][t] * base));
                balance[gen.bus].push((v, 1.0));
            }
            let theta: Vec<_> = (0..n)
                .map(|i| {
                    let b = if i == 0 { (0.0, 0.0) } else { (f64::NEG_INFINITY, f64::INFINITY) };
                    p.add_var(0.0, b)
                })
                .collect();
            for (l, br) in case.branches.iter().enumerate() {
                let cap = br.thermal_limit * base * (1.0 + cfg.upgrade_fraction * gamma[l] as f64);
                let f = p.add_var(0.0, (-cap, cap));
                // f = base (theta_from - theta_to) / x
                let k = base / br.reactance;
                p.add_constraint(
                    &[(f, 1.0), (theta[br.from_bus], -k), (theta[br.to_bus], k)],
                    ComparisonOp::Eq,
                    0.0,
                );
                balance[br.from_bus].push((f, -1.0));
                balance[br.to_bus].push((f, 1.0));
            }
            for (i, row) in balance.iter_mut().enumerate() {
                let shed = p.add_var(w * cfg.penalty_per_mwh, (0.0, f64::INFINITY));
                let over = p.add_var(w * cfg.penalty_per_mwh, (0.0, f64::INFINITY));
                row.push((shed, 1.0));
                row.push((over, -1.0));
                if let (Some((pr, er)), true) = (storage, i == fx.candidate) {
                    let charging = alpha[t];
                    let ch = p.add_var(0.0, (0.0, if charging { f64::INFINITY } else { 0.0 }));
                    let dis = p.add_var(0.0, (0.0, if charging { 0.0 } else { f64::INFINITY }));
                    let soc = p.add_var(0.0, (0.0, f64::INFINITY));
                    p.add_constraint(&[(ch, eta), (pr, -1.0)], ComparisonOp::Le, 0.0);
                    p.add_constraint(&[(dis, 1.0 / eta), (pr, -1.0)], ComparisonOp::Le, 0.0);
                    p.add_constraint(&[(soc, 1.0), (er, -1.0)], ComparisonOp::Le, 0.0);
                    match prev_soc {
                        None => p.add_constraint(
                            &[(soc, 1.0), (er, -0.5), (ch, -eta), (dis, 1.0 / eta)],
                            ComparisonOp::Eq,
                            0.0,
                        ),
                        Some(s0) => p.add_constraint(
                            &[(soc, 1.0), (s0, -1.0), (ch, -eta), (dis, 1.0 / eta)],
                            ComparisonOp::Eq,
                            0.0,
                        ),
                    }
                    if t + 1 == hours {
                        p.add_constraint(&[(soc, 1.0), (er, -0.5)], ComparisonOp::Eq, 0.0);
                    }
                    prev_soc = Some(soc);
                    row.push((dis, 1.0));
                    row.push((ch, -1.0));
                }
                p.add_constraint(row.as_slice(), ComparisonOp::Eq, sc.load[i][t] * base);
            }
        }
    }
    p.solve().ok().map(|s| s.objective() + constant)
}

fn brute_force(fx: &Fixture) -> (f64, usize) {
    let hours = fx.scenarios.hours;
    let nl = fx.case.branches.len();
    let m = fx.config.upgrade_levels;
    let mut best = f64::INFINITY;
    let mut lps = 0;
    let gammas = (m + 1).pow(nl as u32);
    for code in 0..gammas {
        let gamma: Vec<u32> = (0..nl).map(|l| (code / (m + 1).pow(l as u32)) % (m + 1)).collect();
        for sigma in [false, true] {
            let modes = if sigma { 1usize << hours } else { 1 };
            for mask in 0..modes {
                let alpha: Vec<bool> = (0..hours).map(|t| mask >> t & 1 == 1).collect();
                lps += 1;
                if let Some(v) = oracle_lp(fx, &gamma, sigma, &alpha) {
                    best = best.min(v);
                }
            }
        }
    }
    (best, lps)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let fx = three_bus();
    let cands = BTreeSet::from([fx.candidate]);
    let sol = match plan(&fx.case, &fx.scenarios, &exact(fx.config.clone()), &cands, None) {
        Ok(s) => s,
        Err(e) => return outcome(false, format!("planner failed: {e}")),
    };
    let (oracle, lps) = brute_force(&fx);
    let secs = start.elapsed().as_secs_f64();
    let r = rel(sol.solver.objective, oracle);
    outcome(
        r <= 1e-6 && secs < 10.0,
        format!(
            "planner {:.6e}, enumeration {:.6e} over {lps} LPs, rel diff {r:.2e}, {secs:.2}s",
            sol.solver.objective, oracle
        ),
    )
}

// ---------------------------------------------------------------------------
// Randomized storage instances for the linearization and SoC checks.

struct Instance {
    case: GridCase,
    scenarios: ScenarioSet,
    config: PlanConfig,
    candidates: BTreeSet<usize>,
}

fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let hours = rng.gen_range(3..=6);
    let n = 3;
    let loads: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            if i == 0 {
                vec![0.0; hours]
            } else {
                (0..hours).map(|_| rng.gen_range(5.0..80.0)).collect()
            }
        })
        .collect();
    let solar: Vec<f64> = (0..hours).map(|_| rng.gen_range(0.0..1.0)).collect();
    let case = GridCase {
        base_mva: 100.0,
        buses: (0..n).map(|i| bus(i as i64 + 1, loads[i][0])).collect(),
        branches: vec![
            branch(1, 0, 1, rng.gen_range(0.05..0.3), rng.gen_range(20.0..90.0), 50.0),
            branch(2, 1, 2, rng.gen_range(0.05..0.3), rng.gen_range(20.0..90.0), 70.0),
            branch(3, 0, 2, rng.gen_range(0.05..0.3), rng.gen_range(10.0..60.0), 90.0),
        ],
        generators: vec![
            generator(1, 0, GeneratorKind::Coal, 200.0, rng.gen_range(10.0..30.0)),
            generator(2, 2, GeneratorKind::Solar, rng.gen_range(10.0..60.0), 0.0),
        ],
    };
    let gmax = vec![vec![200.0; hours], solar.iter().map(|a| a * case.generators[1].p_max * 100.0).collect()];
    let scenarios = if rng.gen_bool(0.5) {
        scenarios_mw(&[(1.0, loads, gmax)])
    } else {
        let loads2 = loads.iter().map(|r| r.iter().map(|v| v * 0.7).collect()).collect();
        scenarios_mw(&[(0.4, loads, gmax.clone()), (0.6, loads2, gmax)])
    };
    let config = exact(PlanConfig {
        penalty_per_mwh: rng.gen_range(500.0..20_000.0),
        upgrade_levels: rng.gen_range(0..=2),
        efficiency: rng.gen_range(0.8..=1.0),
        storage_cost_multiplier: 10f64.powf(rng.gen_range(-4.0..0.0)),
        ..PlanConfig::default()
    });
    let candidates = match rng.gen_range(0..3) {
        0 => BTreeSet::from([1]),
        1 => BTreeSet::from([2]),
        _ => BTreeSet::from([1, 2]),
    };
    Instance {
        case,
        scenarios,
        config,
        candidates,
    }
}

struct StorageStats {
    instances: usize,
    with_storage: usize,
    max_simultaneous: f64,
    max_terminal: f64,
    max_recursion: f64,
    failures: Vec<String>,
}

fn storage_checks() -> StorageStats {
    let mut rng = ChaCha8Rng::seed_from_u64(20240611);
    let mut st = StorageStats {
        instances: 0,
        with_storage: 0,
        max_simultaneous: 0.0,
        max_terminal: 0.0,
        max_recursion: 0.0,
        failures: Vec::new(),
    };
    for k in 0..120 {
        let inst = random_instance(&mut rng);
        let sol = match plan(&inst.case, &inst.scenarios, &inst.config, &inst.candidates, None) {
            Ok(s) => s,
            Err(e) => {
                st.failures.push(format!("instance {k}: {e}"));
                continue;
            }
        };
        st.instances += 1;
        if sol.investments.storage.iter().any(|&s| s) {
            st.with_storage += 1;
        }
        let eta = inst.config.efficiency;
        for sc in &sol.schedule.scenarios {
            for (site, ops) in sol.schedule.storage_buses.iter().zip(&sc.storage) {
                let er = sol.investments.energy_mwh[*site] / inst.case.base_mva;
                let mut prev = er / 2.0;
                for t in 0..sol.schedule.hours {
                    st.max_simultaneous = st.max_simultaneous.max(ops.ch[t].min(ops.dis[t]));
                    let r = ops.soc[t] - prev - eta * ops.ch[t] + ops.dis[t] / eta;
                    st.max_recursion = st.max_recursion.max(r.abs());
                    prev = ops.soc[t];
                }
                st.max_terminal = st.max_terminal.max((prev - er / 2.0).abs());
            }
        }
    }
    st
}

fn criterion_2(st: &StorageStats) -> Outcome {
    outcome(
        st.failures.is_empty() && st.instances >= 100 && st.with_storage > 0 && st.max_simultaneous <= 1e-6,
        format!(
            "{} instances ({} build storage), max min(ch, dis) = {:.2e} pu{}",
            st.instances,
            st.with_storage,
            st.max_simultaneous,
            if st.failures.is_empty() { String::new() } else { format!("; failures: {:?}", st.failures) }
        ),
    )
}

fn criterion_3(st: &StorageStats) -> Outcome {
    outcome(
        st.failures.is_empty() && st.instances >= 100 && st.max_terminal <= 1e-6 && st.max_recursion <= 1e-6,
        format!(
            "max |soc_T - ER/2| = {:.2e} pu, max recursion residual = {:.2e} pu",
            st.max_terminal, st.max_recursion
        ),
    )
}

// ---------------------------------------------------------------------------

struct Case6 {
    case: GridCase,
    scenarios: ScenarioSet,
}

fn case6(year: i32, k: usize, seed: u64) -> Case6 {
    let raw = parse_case(case6_path()).expect("fixture case parses");
    let series = YearSeries::load_dir(series6_path()).expect("fixture series loads");
    let scaled = scale_case(&raw, &ScalingTable::eia_2023(), year).expect("year in table");
    let clustering = cluster_days(&series, k, seed).expect("clusters");
    let scenarios = build_scenarios(&scaled.case, &series, &clustering, scaled.load_factor).expect("scenarios");
    Case6 {
        case: scaled.case,
        scenarios,
    }
}

fn case6_candidates(c: &Case6, config: &PlanConfig) -> BTreeSet<usize> {
    let report = evaluate(&c.case, &c.scenarios, config, &InvestmentState::none(&c.case)).expect("recourse");
    select_candidates(&report, Rule::Union).bus_set()
}

fn monotone(
    label: &str,
    case: &GridCase,
    sc: &ScenarioSet,
    config: &PlanConfig,
    cands: &BTreeSet<usize>,
) -> Result<String, String> {
    let run = |c: Configuration| -> Result<PlanSolution, String> {
        plan(case, sc, &config.with_configuration(c), cands, None).map_err(|e| format!("{label} {c}: {e}"))
    };
    let both = run(Configuration::TepStorage)?;
    let lines = run(Configuration::TepOnly)?;
    let storage = run(Configuration::StorageOnly)?;
    let gap = config.solver.options.mip_gap;
    let (o, l, s) = (both.total_cost(), lines.total_cost(), storage.total_cost());
    let ok = o <= l + gap * l.abs().max(1.0) + 1e-6 && o <= s + gap * s.abs().max(1.0) + 1e-6;
    let msg = format!("{label}: {o:.4e} vs {l:.4e} / {s:.4e}");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_4() -> Outcome {
    let mut notes = Vec::new();
    let mut bad = Vec::new();
    let fx = three_bus();
    let mut record = |r: Result<String, String>| match r {
        Ok(m) => notes.push(m),
        Err(m) => bad.push(m),
    };
    record(monotone(
        "3-bus",
        &fx.case,
        &fx.scenarios,
        &exact(fx.config.clone()),
        &BTreeSet::from([fx.candidate]),
    ));
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for k in 0..10 {
        let inst = random_instance(&mut rng);
        record(monotone(&format!("random {k}"), &inst.case, &inst.scenarios, &inst.config, &inst.candidates));
    }
    let c6 = case6(2050, 1, 0);
    let cfg = PlanConfig::default();
    let cands = case6_candidates(&c6, &cfg);
    record(monotone("6-bus 2050", &c6.case, &c6.scenarios, &cfg, &cands));
    outcome(
        bad.is_empty(),
        format!(
            "{} fixtures hold; {}{}",
            notes.len(),
            notes.last().cloned().unwrap_or_default(),
            if bad.is_empty() { String::new() } else { format!("; violations: {bad:?}") }
        ),
    )
}

fn criterion_5() -> Outcome {
    let raw = parse_case(case6_path()).expect("fixture case parses");
    let scaled = scale_case(&raw, &ScalingTable::eia_2023(), 2030).expect("2030 in table");
    let mut worst_solar: f64 = 0.0;
    let mut solar_units = 0;
    for (a, b) in raw.generators.iter().zip(&scaled.case.generators) {
        if a.kind == GeneratorKind::Solar {
            solar_units += 1;
            worst_solar = worst_solar.max((b.p_max - 4.51 * a.p_max).abs());
        }
    }
    let series = YearSeries::load_dir(series6_path()).expect("fixture series loads");
    let clustering = cluster_days(&series, 2, 7).expect("clusters");
    let base = build_scenarios(&raw, &series, &clustering, 1.0).expect("scenarios");
    let grown = build_scenarios(&scaled.case, &series, &clustering, scaled.load_factor).expect("scenarios");
    let mut worst_load: f64 = 0.0;
    for (a, b) in base.scenarios.iter().zip(&grown.scenarios) {
        for (ra, rb) in a.load.iter().zip(&b.load) {
            for (x, y) in ra.iter().zip(rb) {
                worst_load = worst_load.max((y - 1.13 * x).abs());
            }
        }
    }
    let factor_ok = (scaled.load_factor - 1.13).abs() <= 1e-12;
    outcome(
        solar_units > 0 && worst_solar <= 1e-12 && worst_load <= 1e-12 && factor_ok,
        format!(
            "{solar_units} solar unit(s): max |p - 4.51 p0| = {worst_solar:.1e}; load factor {}, max |d - 1.13 d0| = {worst_load:.1e}",
            scaled.load_factor
        ),
    )
}

fn criterion_6() -> Outcome {
    let case = GridCase {
        base_mva: 100.0,
        buses: vec![bus(1, 1.0)],
        branches: vec![],
        generators: vec![generator(1, 0, GeneratorKind::NaturalGas, 0.0, 25.0)],
    };
    let sc = scenarios_mw(&[(1.0, vec![vec![1.0; 24]], vec![vec![0.0; 24]])]);
    let config = exact(PlanConfig::default());
    let (_, sol) = match evaluate_full(&case, &sc, &config, &InvestmentState::none(&case)) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("recourse failed: {e}")),
    };
    let shed_mwh: f64 = sol.schedule.scenarios[0].shed[0].iter().map(|v| v * 100.0).sum();
    let expected = 365.0 * 2.5e6 * shed_mwh;
    let hourly_ok = sol.schedule.scenarios[0].shed[0].iter().all(|v| (v * 100.0 - 1.0).abs() <= 1e-9);
    let r = rel(sol.penalty_cost, expected);
    outcome(
        hourly_ok && r <= 1e-12 && sol.penalty_cost == 365.0 * 2.5e6 * 24.0,
        format!(
            "sum shed {shed_mwh} MWh, penalty ${:.1}, expected ${expected:.1}, rel diff {r:.1e}",
            sol.penalty_cost
        ),
    )
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    // Bus 0 supplies A (bus 1) and B (bus 2) over separate radial lines.
    let case = GridCase {
        base_mva: 100.0,
        buses: vec![bus(1, 0.0), bus(2, 40.0), bus(3, 30.0)],
        branches: vec![branch(1, 0, 1, 0.1, 50.0, 60.0), branch(2, 0, 2, 0.1, 50.0, 60.0)],
        generators: vec![generator(1, 0, GeneratorKind::NaturalGas, 500.0, 20.0)],
    };
    let days: Vec<_> = (0..5)
        .map(|d| {
            let b = if d == 4 { vec![30.0, 30.0, 70.0, 70.0] } else { vec![30.0; 4] };
            (0.2, vec![vec![0.0; 4], vec![30.0, 30.0, 60.0, 60.0], b], vec![vec![500.0; 4]])
        })
        .collect();
    let sc = scenarios_mw(&days);
    let config = exact(PlanConfig::default().with_configuration(Configuration::StorageOnly));
    let none = InvestmentState::none(&case);
    let report = match evaluate(&case, &sc, &config, &none) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("recourse failed: {e}")),
    };
    let inter = select_candidates(&report, Rule::Intersection);
    let union = select_candidates(&report, Rule::Union);
    let sol = match plan(&case, &sc, &config, &inter.bus_set(), None) {
        Ok(s) => s,
        Err(e) => return outcome(false, format!("planning failed: {e}")),
    };
    let post = match evaluate(&case, &sc, &config, &sol.investments) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("post recourse failed: {e}")),
    };
    let aug = augment_candidates(&inter, &post);
    let secs = start.elapsed().as_secs_f64();
    let (a, b) = (1usize, 2usize);
    let ok = inter.bus_set() == BTreeSet::from([a])
        && union.bus_set() == BTreeSet::from([a, b])
        && aug.bus_set() == BTreeSet::from([a, b])
        && secs < 5.0;
    outcome(
        ok,
        format!(
            "intersection {:?}, union {:?}, augmented {:?} (storage at A: {:.1} MWh), {secs:.2}s",
            inter.bus_set(),
            union.bus_set(),
            aug.bus_set(),
            sol.investments.energy_mwh[a]
        ),
    )
}

fn criterion_8() -> Outcome {
    let c6 = case6(2050, 2, 7);
    let config = PlanConfig::default().with_configuration(Configuration::StorageOnly);
    let cands = BTreeSet::from([1, 3, 4]);
    let tep = match build_model(&c6.case, &c6.scenarios, &config, &cands, None) {
        Ok(t) => t,
        Err(e) => return outcome(false, format!("build failed: {e}")),
    };
    let want = cands.len() * (1 + 24 * c6.scenarios.len());
    let ok = tep.storage_binaries() == want
        && tep.model.num_binary() == want
        && storage_binary_count(cands.len(), c6.scenarios.len(), 24) == want
        && storage_binary_count(147, 1, 24) == 3675;
    outcome(
        ok,
        format!(
            "|SC| = {}, k = {}: reported {}, model has {} binaries, formula {want}; |SC| = 147, k = 1 gives {}",
            cands.len(),
            c6.scenarios.len(),
            tep.storage_binaries(),
            tep.model.num_binary(),
            storage_binary_count(147, 1, 24)
        ),
    )
}

fn criterion_9() -> Outcome {
    let c6 = case6(2050, 1, 0);
    let config = PlanConfig::default();
    let cands = case6_candidates(&c6, &config);
    let tep = match build_model(&c6.case, &c6.scenarios, &config, &cands, None) {
        Ok(t) => t,
        Err(e) => return outcome(false, format!("build failed: {e}")),
    };
    let text = match write_mps_string(&tep.model) {
        Ok(t) => t,
        Err(e) => return outcome(false, format!("write failed: {e}")),
    };
    let back = match read_mps_str(&text) {
        Ok(m) => m,
        Err(e) => return outcome(false, format!("read failed: {e}")),
    };
    let identical = back.variables == tep.model.variables
        && back.constraints == tep.model.constraints
        && back.objective_constant == tep.model.objective_constant;

    let internal = match solve(&tep.model, &config.solver.options) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("internal solve failed: {e}")),
    };
    let script = root().join("scripts/scipy_milp.py");
    let cmd = format!("python3 {} --gap 1e-4", script.display());
    let external = match solve_external(&tep.model, &cmd) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("round-trip identical: {identical}; external solver failed: {e}")),
    };
    let r = rel(internal.objective, external.objective);
    outcome(
        identical && internal.status.has_solution() && external.status.has_solution() && r <= 0.01,
        format!(
            "{} vars / {} rows round-trip identical: {identical}; internal {:.6e}, external {:.6e}, rel diff {r:.2e}",
            tep.model.num_vars(),
            tep.model.constraints.len(),
            internal.objective,
            external.objective
        ),
    )
}

// ---------------------------------------------------------------------------

/// A January of two alternating day shapes, as CSV text for the series reader.
fn two_shape_year(days: usize) -> (String, String, String) {
    let mut load = String::from("timestamp,1\n");
    let mut wind = String::from("timestamp,2\n");
    let mut solar = String::from("timestamp,3\n");
    for d in 0..days {
        for h in 0..24 {
            let stamp = format!("2023-01-{:02} {h:02}:00:00", d + 1);
            let jitter = 1e-3 * ((d * 24 + h) % 7) as f64;
            let (l, w, s) = if d % 2 == 0 {
                (100.0 + jitter, 0.8, 0.0)
            } else {
                let peak = if (9..18).contains(&h) { 1.0 } else { 0.0 };
                (60.0 + 80.0 * peak + jitter, 0.1, 0.9 * peak)
            };
            load.push_str(&format!("{stamp},{l}\n"));
            wind.push_str(&format!("{stamp},{w}\n"));
            solar.push_str(&format!("{stamp},{s}\n"));
        }
    }
    (load, wind, solar)
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn medoid_cost(points: &[Vec<f64>], medoids: &[usize]) -> f64 {
    points
        .iter()
        .map(|p| medoids.iter().map(|&m| euclid(p, &points[m])).fold(f64::INFINITY, f64::min))
        .sum()
}

/// No single medoid/non-medoid exchange lowers the cost.
fn swap_optimal(points: &[Vec<f64>], medoids: &[usize]) -> bool {
    let base = medoid_cost(points, medoids);
    for slot in 0..medoids.len() {
        for o in 0..points.len() {
            if medoids.contains(&o) {
                continue;
            }
            let mut trial = medoids.to_vec();
            trial[slot] = o;
            if medoid_cost(points, &trial) < base - 1e-9 * base.max(1.0) {
                return false;
            }
        }
    }
    true
}

fn criterion_10() -> Outcome {
    let start = Instant::now();
    let (l, w, s) = two_shape_year(30);
    let series = match YearSeries::from_readers(l.as_bytes(), w.as_bytes(), s.as_bytes()) {
        Ok(s) => s,
        Err(e) => return outcome(false, format!("series: {e}")),
    };
    let cl = match cluster_days(&series, 2, 3) {
        Ok(c) => c,
        Err(e) => return outcome(false, format!("clustering: {e}")),
    };
    let recovered = (0..series.days()).all(|d| cl.assignment[d] == cl.assignment[d % 2])
        && cl.assignment[0] != cl.assignment[1];
    let weights_ok = cl.weights.iter().all(|w| (w - 0.5).abs() <= 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut instances = 0;
    let mut failures = Vec::new();
    let features = day_features(&series);
    if !swap_optimal(&features, &cl.medoids) {
        failures.push("two-shape year".to_string());
    }
    for trial in 0..200 {
        let n = rng.gen_range(2..=30);
        let dim = rng.gen_range(1..=4);
        let points: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.gen_range(-10.0..10.0)).collect())
            .collect();
        let k = rng.gen_range(1..=n.min(5));
        let seed = rng.gen::<u64>();
        match pam(&Distances::euclidean(&points), k, seed) {
            Ok(m) if swap_optimal(&points, &m) => {}
            Ok(m) => failures.push(format!("trial {trial}: n={n} k={k} medoids {m:?}")),
            Err(e) => failures.push(format!("trial {trial}: {e}")),
        }
        instances += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        recovered && weights_ok && failures.is_empty() && secs < 30.0,
        format!(
            "shapes recovered: {recovered}, weights {:?}; swap-optimal on {}/{} instances (n <= 30), {secs:.2}s{}",
            cl.weights,
            instances + 1 - failures.len(),
            instances + 1,
            if failures.is_empty() { String::new() } else { format!("; {failures:?}") }
        ),
    )
}

// ---------------------------------------------------------------------------

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).expect("readable output dir") {
            let p = entry.expect("dir entry").path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).expect("under dir").to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn criterion_11() -> Outcome {
    let tmp = tempfile::tempdir().expect("tempdir");
    let manifest = tmp.path().join("study.toml");
    let fixtures = root().join("fixtures/case6");
    std::fs::write(
        &manifest,
        format!(
            "case = {:?}\nseries = {:?}\nconfig = {:?}\nyears = [2030, 2040]\nk = 1\nseed = 11\n",
            fixtures.join("case6.m"),
            fixtures.join("series"),
            fixtures.join("plan.toml"),
        ),
    )
    .expect("manifest written");
    let run = |name: &str| -> Result<PathBuf, String> {
        let out = tmp.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_gridplan"))
            .arg("--out")
            .arg(&out)
            .arg("study")
            .arg(&manifest)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(String::from_utf8_lossy(&status.stderr).into_owned());
        }
        Ok(out)
    };
    let (a, b) = match (run("a"), run("b")) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return outcome(false, format!("study failed: {e}")),
    };
    let fa = files_under(&a);
    let fb = files_under(&b);
    let kinds = |ext: &str| fa.iter().filter(|p| p.extension().is_some_and(|e| e == ext)).count();
    let differing: Vec<_> = fa
        .iter()
        .filter(|p| std::fs::read(a.join(p)).ok() != std::fs::read(b.join(p)).ok())
        .collect();
    let ok = fa == fb && differing.is_empty() && kinds("csv") > 0 && kinds("json") > 0 && kinds("geojson") > 0;
    outcome(
        ok,
        format!(
            "{} files ({} csv, {} json, {} geojson), {} differ",
            fa.len(),
            kinds("csv"),
            kinds("json"),
            kinds("geojson"),
            differing.len()
        ),
    )
}

#[test]
fn acceptance_criteria() {
    let storage = storage_checks();
    let results = vec![
        criterion_1(),
        criterion_2(&storage),
        criterion_3(&storage),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(),
        criterion_11(),
    ];
    // Written to the raw handle so the lines survive output capture.
    let mut out = std::io::stdout().lock();
    for (i, r) in results.iter().enumerate() {
        let verdict = if r.pass { "PASS" } else { "FAIL" };
        writeln!(out, "criterion {:>2}: {} ({})", i + 1, verdict, r.detail).unwrap();
    }
    drop(out);
    let failed: Vec<usize> = (0..results.len()).filter(|&i| !results[i].pass).map(|i| i + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
