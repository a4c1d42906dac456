use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use gridplan::candidates::{select_candidates, CandidateSet, Rule};
use gridplan::grid::{parse_case, scale_case, GridCase, ScalingTable};
use gridplan::milp::write_mps;
use gridplan::planner::{run_study, StudyManifest};
use gridplan::recourse::evaluate_full;
use gridplan::report::{
    candidate_features, feature_collection, investment_features, recourse_features,
    solution_geojson, write_investments_csv, write_json, write_schedule_csv, write_text,
};
use gridplan::scenario::{build_scenarios, cluster_days, day_averages, ScenarioSet, YearSeries};
use gridplan::tep::{
    build_model, plan, Configuration, InvestmentState, PlanConfig, PlanSolution,
};
use gridplan::Error;

/// Transmission and storage expansion planning.
#[derive(Debug, Parser)]
#[command(name = "gridplan", version)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    /// Output directory.
    #[arg(long, short, global = true, env = "GRIDPLAN_OUT", default_value = ".")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and validate a case file and print a summary.
    Parse {
        case: PathBuf,
        /// Also write the parsed case as case.json.
        #[arg(long)]
        json: bool,
    },
    /// Cluster a year of hourly data into representative days.
    Cluster(ClusterArgs),
    /// Find storage candidate buses from a recourse run.
    Candidates {
        #[command(flatten)]
        input: Inputs,
        #[arg(long, default_value = "intersection")]
        rule: Rule,
        /// Investments to hold fixed during the recourse run.
        #[arg(long)]
        carry: Option<PathBuf>,
    },
    /// Solve one planning problem.
    Plan {
        #[command(flatten)]
        input: Inputs,
        /// Candidate set JSON; computed from a recourse run when omitted.
        #[arg(long)]
        candidates: Option<PathBuf>,
        #[arg(long, default_value = "intersection")]
        rule: Rule,
        /// Prior investments (solution or investment JSON) carried as lower bounds.
        #[arg(long)]
        carry: Option<PathBuf>,
    },
    /// Evaluate operations with fixed investments.
    Evaluate {
        #[command(flatten)]
        input: Inputs,
        /// Solution or investment JSON; no investments when omitted.
        #[arg(long)]
        investments: Option<PathBuf>,
    },
    /// Run a multi-stage study from a manifest.
    Study {
        /// Study manifest TOML.
        manifest: PathBuf,
        #[command(flatten)]
        overrides: SolverOverrides,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        storage_cost_mult: Option<f64>,
    },
    /// Write the planning model as MPS.
    ExportMps {
        #[command(flatten)]
        input: Inputs,
        #[arg(long)]
        candidates: Option<PathBuf>,
        #[arg(long)]
        carry: Option<PathBuf>,
        #[arg(long, default_value = "model.mps")]
        file: PathBuf,
    },
}

#[derive(Debug, Args)]
struct ClusterArgs {
    /// Directory with load.csv, wind.csv and solar.csv.
    #[arg(long)]
    series: PathBuf,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Case for the per-day averages table.
    #[arg(long)]
    case: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SolverOverrides {
    /// Planning config TOML.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Relative MIP gap.
    #[arg(long)]
    gap: Option<f64>,
    /// Per-solve time limit in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    /// External solver command, called as `<cmd> model.mps solution.out`.
    #[arg(long)]
    external_solver: Option<String>,
}

#[derive(Debug, Args)]
struct Inputs {
    /// MATPOWER case file.
    #[arg(long)]
    case: PathBuf,
    /// Directory with load.csv, wind.csv and solar.csv.
    #[arg(long)]
    series: PathBuf,
    /// Number of representative days.
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scale the case to this year's projections.
    #[arg(long)]
    year: Option<i32>,
    /// Scaling table TOML; built-in projections otherwise.
    #[arg(long)]
    scaling: Option<PathBuf>,
    /// tep_storage, tep_only or storage_only.
    #[arg(long)]
    configuration: Option<Configuration>,
    /// Multiplies every storage cost term.
    #[arg(long)]
    storage_cost_mult: Option<f64>,
    #[command(flatten)]
    solver: SolverOverrides,
}

impl SolverOverrides {
    fn apply(&self, mut config: PlanConfig) -> Result<PlanConfig, Error> {
        if let Some(g) = self.gap {
            config.solver.options.mip_gap = g;
        }
        if let Some(t) = self.time_limit {
            config.solver.options.time_limit = Some(t);
        }
        if let Some(cmd) = &self.external_solver {
            config.solver.external = Some(cmd.clone());
        }
        config.validate()?;
        Ok(config)
    }

    fn load(&self) -> Result<PlanConfig, Error> {
        let base = match &self.config {
            Some(p) => PlanConfig::load(p)?,
            None => PlanConfig::default(),
        };
        self.apply(base)
    }
}

/// Case, scenarios and config after overrides.
struct Prepared {
    case: GridCase,
    scenarios: ScenarioSet,
    config: PlanConfig,
    stage: String,
}

impl Inputs {
    fn prepare(&self) -> Result<Prepared, Error> {
        let mut config = self.solver.load()?;
        if let Some(c) = self.configuration {
            config = config.with_configuration(c);
        }
        if let Some(m) = self.storage_cost_mult {
            config = config.with_storage_multiplier(m);
        }
        config.validate()?;
        let case = parse_case(&self.case)?;
        let series = YearSeries::load_dir(&self.series)?;
        let (case, factor, stage) = match self.year {
            Some(y) => {
                let table = match &self.scaling {
                    Some(p) => ScalingTable::load(p)?,
                    None => ScalingTable::eia_2023(),
                };
                let s = scale_case(&case, &table, y)?;
                (s.case, s.load_factor, y.to_string())
            }
            None => (case, 1.0, "base".to_string()),
        };
        let clustering = cluster_days(&series, self.k, self.seed)?;
        let scenarios = build_scenarios(&case, &series, &clustering, factor)?;
        Ok(Prepared {
            case,
            scenarios,
            config,
            stage,
        })
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Accepts either a full solution or a bare investment state.
fn read_investments(path: &Path, case: &GridCase) -> Result<InvestmentState, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let inv = match serde_json::from_str::<PlanSolution>(&text) {
        Ok(sol) => sol.investments,
        Err(_) => serde_json::from_str::<InvestmentState>(&text)
            .map_err(|e| Error::Invalid(format!("{}: not a solution or investment file: {e}", path.display())))?,
    };
    if inv.upgrades.len() != case.branches.len() || inv.storage.len() != case.buses.len() {
        return Err(Error::Invalid(format!(
            "{}: investments do not match the case dimensions",
            path.display()
        )));
    }
    Ok(inv)
}

fn auto_candidates(p: &Prepared, carry: &InvestmentState, rule: Rule) -> Result<CandidateSet, Error> {
    if !p.config.configuration.allows_storage() {
        return Ok(CandidateSet::default());
    }
    let (report, _) = evaluate_full(&p.case, &p.scenarios, &p.config, carry)?;
    let set = select_candidates(&report, rule);
    info!("|SC| = {}", set.len());
    Ok(set)
}

fn run(cli: &Cli) -> Result<(), Error> {
    let out = &cli.out;
    match &cli.command {
        Command::Parse { case, json } => {
            let c = parse_case(case)?;
            let load: f64 = c.buses.iter().map(|b| b.load).sum::<f64>() * c.base_mva;
            let cap: f64 = c.generators.iter().map(|g| g.p_max).sum::<f64>() * c.base_mva;
            println!(
                "{}: {} buses, {} branches, {} generators, load {:.1} MW, capacity {:.1} MW",
                case.display(),
                c.buses.len(),
                c.branches.len(),
                c.generators.len(),
                load,
                cap
            );
            if *json {
                write_json(out.join("case.json"), &c)?;
            }
        }
        Command::Cluster(a) => {
            let series = YearSeries::load_dir(&a.series)?;
            let clustering = cluster_days(&series, a.k, a.seed)?;
            for (c, &day) in clustering.medoids.iter().enumerate() {
                println!(
                    "{}  weight {:.4}  ({} days)",
                    series.dates[day],
                    clustering.weights[c],
                    clustering.sizes[c]
                );
            }
            write_json(out.join("clustering.json"), &clustering)?;
            if let Some(case_path) = &a.case {
                let case = parse_case(case_path)?;
                let scen = build_scenarios(&case, &series, &clustering, 1.0)?;
                let mut buf = Vec::new();
                {
                    let mut w = csv::Writer::from_writer(&mut buf);
                    w.write_record(["day", "weight", "load_gw", "wind_gw", "solar_gw"])?;
                    for d in day_averages(&case, &scen) {
                        w.write_record([
                            d.label,
                            d.weight.to_string(),
                            d.load_gw.to_string(),
                            d.wind_gw.to_string(),
                            d.solar_gw.to_string(),
                        ])?;
                    }
                    w.flush().map_err(csv::Error::from)?;
                }
                write_text(out.join("representative_days.csv"), &String::from_utf8_lossy(&buf))?;
            }
        }
        Command::Candidates { input, rule, carry } => {
            let p = input.prepare()?;
            let carry = match carry {
                Some(path) => read_investments(path, &p.case)?,
                None => InvestmentState::none(&p.case),
            };
            let (report, _) = evaluate_full(&p.case, &p.scenarios, &p.config, &carry)?;
            let set = select_candidates(&report, *rule);
            println!("|SC| = {}", set.len());
            if set.is_empty() {
                warn!("no bus sheds load or curtails renewables; storage has no candidates");
            }
            write_json(out.join("candidates.json"), &set)?;
            let feats = candidate_features(&p.case, &set, Some(&report), &p.stage);
            write_json(out.join("candidates.geojson"), &feature_collection(feats))?;
        }
        Command::Plan {
            input,
            candidates,
            rule,
            carry,
        } => {
            let p = input.prepare()?;
            let carry = match carry {
                Some(path) => read_investments(path, &p.case)?,
                None => InvestmentState::none(&p.case),
            };
            let set = match candidates {
                Some(path) => read_json::<CandidateSet>(path)?,
                None => auto_candidates(&p, &carry, *rule)?,
            };
            let start = Instant::now();
            let sol = plan(&p.case, &p.scenarios, &p.config, &set.bus_set(), Some(&carry))?;
            info!(
                "solved in {:.2}s: {} binaries ({} storage)",
                start.elapsed().as_secs_f64(),
                sol.solver.binaries,
                sol.solver.storage_binaries
            );
            println!(
                "{} ({}): objective {:.6e}, gap {:.2e}, capex lines ${:.0}, capex storage ${:.0}, genex ${:.0}, shed {:.3} MWh",
                sol.configuration,
                sol.solver.status.as_str(),
                sol.solver.objective,
                sol.solver.gap,
                sol.capex_lines,
                sol.capex_storage,
                sol.genex,
                sol.load_shed
            );
            write_json(out.join("solution.json"), &sol)?;
            write_json(out.join("solution.geojson"), &solution_geojson(&p.case, &p.config, &sol, &p.stage))?;
            let mut buf = Vec::new();
            write_investments_csv(&p.case, &p.config, &sol.investments, &mut buf)?;
            write_text(out.join("investments.csv"), &String::from_utf8_lossy(&buf))?;
            let mut buf = Vec::new();
            write_schedule_csv(&p.case, &sol, &mut buf)?;
            write_text(out.join("schedule.csv"), &String::from_utf8_lossy(&buf))?;
        }
        Command::Evaluate { input, investments } => {
            let p = input.prepare()?;
            let inv = match investments {
                Some(path) => read_investments(path, &p.case)?,
                None => InvestmentState::none(&p.case),
            };
            let (report, _) = evaluate_full(&p.case, &p.scenarios, &p.config, &inv)?;
            println!(
                "objective {:.6e}, shed {:.3} MWh, curtailed {:.3} MWh",
                report.objective,
                report.total_shed(),
                report.total_curtailed()
            );
            write_json(out.join("recourse.json"), &report)?;
            let mut buf = Vec::new();
            report.write_node_csv(&mut buf)?;
            write_text(out.join("recourse_nodes.csv"), &String::from_utf8_lossy(&buf))?;
            let mut buf = Vec::new();
            report.write_branch_csv(&mut buf)?;
            write_text(out.join("recourse_branches.csv"), &String::from_utf8_lossy(&buf))?;
            let feats = recourse_features(&p.case, &report, &inv.upgrades, &p.stage);
            write_json(out.join("recourse.geojson"), &feature_collection(feats))?;
        }
        Command::Study {
            manifest,
            overrides,
            k,
            seed,
            storage_cost_mult,
        } => {
            let mut m = StudyManifest::load(manifest)?;
            if let Some(k) = k {
                m.k = *k;
            }
            if let Some(s) = seed {
                m.seed = *s;
            }
            if let Some(mult) = storage_cost_mult {
                m.multipliers = vec![*mult];
            }
            if let Some(c) = &overrides.config {
                m.config = Some(c.clone());
            }
            let mut study = m.load_inputs()?;
            study.config = overrides.apply(study.config)?;
            let start = Instant::now();
            let result = run_study(&study.case, &study.series, &study.horizon, &study.config, &study.options)?;
            info!("study finished in {:.2}s", start.elapsed().as_secs_f64());
            let csv = result.csv_string()?;
            print!("{csv}");
            write_text(out.join("study.csv"), &csv)?;
            write_json(out.join("study.json"), &result)?;
            for rec in &result.stages {
                let tag = rec.tag();
                write_json(out.join("stages").join(format!("{tag}.json")), rec)?;
                let stage = rec.year.to_string();
                let mut feats = Vec::new();
                if let Some(sol) = &rec.solution {
                    feats.extend(investment_features(&study.case, &study.config, &sol.investments, &stage));
                }
                if let Some(set) = &rec.candidates {
                    feats.extend(candidate_features(&study.case, set, None, &stage));
                }
                write_json(
                    out.join("stages").join(format!("{tag}.geojson")),
                    &feature_collection(feats),
                )?;
            }
        }
        Command::ExportMps {
            input,
            candidates,
            carry,
            file,
        } => {
            let p = input.prepare()?;
            let carry = match carry {
                Some(path) => read_investments(path, &p.case)?,
                None => InvestmentState::none(&p.case),
            };
            let set: BTreeSet<usize> = match candidates {
                Some(path) => read_json::<CandidateSet>(path)?.bus_set(),
                None => BTreeSet::new(),
            };
            let tep = build_model(&p.case, &p.scenarios, &p.config, &set, Some(&carry))?;
            let path = if file.is_absolute() { file.clone() } else { out.join(file) };
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            write_mps(&tep.model, &path)?;
            println!(
                "{}: {} variables, {} rows, {} binaries",
                path.display(),
                tep.model.num_vars(),
                tep.model.constraints.len(),
                tep.model.num_binary()
            );
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Solver(_) | Error::External { .. } | Error::Decode(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
