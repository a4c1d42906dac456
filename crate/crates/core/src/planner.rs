//! Multi-stage planning studies with carried-forward investments and
//! storage-cost sweeps.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::candidates::{augment_candidates, select_candidates, CandidateSet, Rule};
use crate::error::{Error, Result};
use crate::grid::{parse_case, scale_case, GridCase, ScalingTable};
use crate::milp::SolveStatus;
use crate::recourse::evaluate;
use crate::scenario::{build_scenarios, cluster_days, Clustering, ScenarioSet, YearSeries};
use crate::tep::{
    build_model, decode_solution, solve_model, Configuration, InvestmentState, PlanConfig,
    PlanSolution,
};

/// Stage years and the storage-cost sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanningHorizon {
    pub years: Vec<i32>,
    pub table: ScalingTable,
    pub multipliers: Vec<f64>,
}

impl PlanningHorizon {
    pub fn new(years: Vec<i32>, table: ScalingTable, multipliers: Vec<f64>) -> Result<Self> {
        let h = PlanningHorizon {
            years,
            table,
            multipliers,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if self.years.is_empty() {
            return Err(Error::Config("horizon has no stages".into()));
        }
        if self.years.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "stage years must be strictly increasing, got {:?}",
                self.years
            )));
        }
        for &y in &self.years {
            self.table.factors(y).map_err(|_| {
                Error::Config(format!("year {y} is not in the scaling table"))
            })?;
        }
        if self.multipliers.is_empty() {
            return Err(Error::Config("at least one storage-cost multiplier is required".into()));
        }
        if let Some(m) = self.multipliers.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
            return Err(Error::Config(format!("storage-cost multipliers must be positive, got {m}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOptions {
    pub k: usize,
    pub seed: u64,
    pub rule: Rule,
    /// Re-plan rounds that add post-investment shed buses to the candidates.
    pub augment_rounds: usize,
    pub configurations: Vec<Configuration>,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions {
            k: 1,
            seed: 0,
            rule: Rule::Intersection,
            augment_rounds: 0,
            configurations: Configuration::ALL.to_vec(),
        }
    }
}

/// One CSV row: cumulative investments after a stage plus its incremental costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub configuration: Configuration,
    pub multiplier: f64,
    pub year: i32,
    pub status: String,
    pub lines: Option<usize>,
    pub storage_units: Option<usize>,
    pub storage_gwh: Option<f64>,
    /// `None` when no candidate search ran (tep_only).
    pub candidates: Option<usize>,
    /// Lines at the top upgrade level.
    pub max_lines: Option<usize>,
    /// Storage units at the energy-rating cap.
    pub max_storage: Option<usize>,
    pub capex_lines_musd: Option<f64>,
    pub capex_storage_busd: Option<f64>,
    pub capex_lines_cumulative_musd: Option<f64>,
    pub capex_storage_cumulative_busd: Option<f64>,
    pub genex_busd: Option<f64>,
    pub load_shed_gwh: Option<f64>,
    pub curtailment_gwh: Option<f64>,
    pub objective: Option<f64>,
    pub gap: Option<f64>,
    pub binaries: Option<usize>,
    pub storage_binaries: Option<usize>,
}

/// Everything produced at one (configuration, multiplier, year).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub configuration: Configuration,
    pub multiplier: f64,
    pub year: i32,
    pub candidates: Option<CandidateSet>,
    pub augment_rounds_used: usize,
    pub solution: Option<PlanSolution>,
    /// Set when the stage failed without a usable solution.
    pub error: Option<String>,
}

impl StageRecord {
    /// Short name used for per-stage output files.
    pub fn tag(&self) -> String {
        format!("{}_x{}_{}", self.configuration, format_mult(self.multiplier), self.year)
    }
}

fn format_mult(m: f64) -> String {
    format!("{m}").replace('.', "p")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub clustering: Clustering,
    pub rows: Vec<StudyRow>,
    pub stages: Vec<StageRecord>,
}

const CSV_HEADER: [&str; 21] = [
    "config",
    "multiplier",
    "year",
    "status",
    "lines",
    "storage_units",
    "storage_gwh",
    "candidates",
    "max_lines",
    "max_storage",
    "capex_lines_musd",
    "capex_storage_busd",
    "capex_lines_cum_musd",
    "capex_storage_cum_busd",
    "genex_busd",
    "load_shed_gwh",
    "curtailment_gwh",
    "objective",
    "gap",
    "binaries",
    "storage_binaries",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Drops the sign of negative zero so empty sums print as `0`.
fn unsigned_zero(x: f64) -> Option<f64> {
    Some(x + 0.0)
}

impl StudyResult {
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CSV_HEADER)?;
        for r in &self.rows {
            out.write_record([
                r.configuration.to_string(),
                r.multiplier.to_string(),
                r.year.to_string(),
                r.status.clone(),
                opt(r.lines),
                opt(r.storage_units),
                opt(r.storage_gwh),
                opt(r.candidates),
                opt(r.max_lines),
                opt(r.max_storage),
                opt(r.capex_lines_musd),
                opt(r.capex_storage_busd),
                opt(r.capex_lines_cumulative_musd),
                opt(r.capex_storage_cumulative_busd),
                opt(r.genex_busd),
                opt(r.load_shed_gwh),
                opt(r.curtailment_gwh),
                opt(r.objective),
                opt(r.gap),
                opt(r.binaries),
                opt(r.storage_binaries),
            ])?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn rows_for(&self, configuration: Configuration, multiplier: f64) -> Vec<&StudyRow> {
        self.rows
            .iter()
            .filter(|r| r.configuration == configuration && r.multiplier == multiplier)
            .collect()
    }
}

fn row_from(
    config: &PlanConfig,
    sol: &PlanSolution,
    candidates: Option<usize>,
    cum: (f64, f64),
) -> StudyRow {
    let inv = &sol.investments;
    let sites = inv.storage_sites();
    let cap = config.storage_max_energy_mwh;
    StudyRow {
        configuration: sol.configuration,
        multiplier: config.storage_cost_multiplier,
        year: 0,
        status: sol.solver.status.as_str().to_string(),
        lines: Some(inv.upgrades.iter().filter(|&&g| g > 0).count()),
        storage_units: Some(sites.len()),
        storage_gwh: unsigned_zero(sites.iter().map(|&i| inv.energy_mwh[i]).sum::<f64>() / 1e3),
        candidates,
        max_lines: Some(inv.upgrades.iter().filter(|&&g| g >= config.upgrade_levels).count()),
        max_storage: Some(sites.iter().filter(|&&i| inv.energy_mwh[i] >= cap * (1.0 - 1e-6)).count()),
        capex_lines_musd: unsigned_zero(sol.capex_lines / 1e6),
        capex_storage_busd: unsigned_zero(sol.capex_storage / 1e9),
        capex_lines_cumulative_musd: unsigned_zero(cum.0 / 1e6),
        capex_storage_cumulative_busd: unsigned_zero(cum.1 / 1e9),
        genex_busd: unsigned_zero(sol.genex / 1e9),
        load_shed_gwh: unsigned_zero(sol.load_shed / 1e3),
        curtailment_gwh: unsigned_zero(sol.curtailment / 1e3),
        objective: unsigned_zero(sol.solver.objective),
        gap: unsigned_zero(sol.solver.gap),
        binaries: Some(sol.solver.binaries),
        storage_binaries: Some(sol.solver.storage_binaries),
    }
}

fn failed_row(
    configuration: Configuration,
    multiplier: f64,
    year: i32,
    status: &str,
    candidates: Option<usize>,
) -> StudyRow {
    StudyRow {
        configuration,
        multiplier,
        year,
        status: status.to_string(),
        lines: None,
        storage_units: None,
        storage_gwh: None,
        candidates,
        max_lines: None,
        max_storage: None,
        capex_lines_musd: None,
        capex_storage_busd: None,
        capex_lines_cumulative_musd: None,
        capex_storage_cumulative_busd: None,
        genex_busd: None,
        load_shed_gwh: None,
        curtailment_gwh: None,
        objective: None,
        gap: None,
        binaries: None,
        storage_binaries: None,
    }
}

/// Solve failure that should become a row rather than abort the study.
enum StageFailure {
    Status(SolveStatus),
    Error(String),
}

fn solve_stage(
    case: &GridCase,
    scenarios: &ScenarioSet,
    config: &PlanConfig,
    candidates: &CandidateSet,
    carry: &InvestmentState,
) -> std::result::Result<PlanSolution, StageFailure> {
    let tep = build_model(case, scenarios, config, &candidates.bus_set(), Some(carry))
        .map_err(|e| StageFailure::Error(e.to_string()))?;
    let start = Instant::now();
    let result = solve_model(&tep.model, &config.solver).map_err(|e| StageFailure::Error(e.to_string()))?;
    info!(
        "{}: {} in {:.2}s, {} binaries ({} storage), {} nodes",
        tep.model.name,
        result.status.as_str(),
        start.elapsed().as_secs_f64(),
        tep.model.num_binary(),
        tep.storage_binaries(),
        result.nodes
    );
    if !result.status.has_solution() {
        return Err(StageFailure::Status(result.status));
    }
    decode_solution(&tep, case, scenarios, config, &result).map_err(|e| StageFailure::Error(e.to_string()))
}

/// Runs every configuration and multiplier over the horizon.
///
/// Each stage scales the case, builds scenarios from the shared clustering,
/// finds storage candidates with the carried investments fixed, plans, and
/// carries the result forward. A stage without a solution leaves the carry
/// unchanged and is recorded with its status.
pub fn run_study(
    case: &GridCase,
    series: &YearSeries,
    horizon: &PlanningHorizon,
    config: &PlanConfig,
    options: &StudyOptions,
) -> Result<StudyResult> {
    horizon.validate()?;
    config.validate()?;
    case.validate()?;
    if options.configurations.is_empty() {
        return Err(Error::Config("no configurations selected".into()));
    }
    let clustering = cluster_days(series, options.k, options.seed)?;
    info!(
        "clustered {} days into {} representative day(s), medoids {:?}",
        series.days(),
        options.k,
        clustering.medoids
    );

    // Scenarios depend only on the year.
    let mut staged = Vec::with_capacity(horizon.years.len());
    for &year in &horizon.years {
        let scaled = scale_case(case, &horizon.table, year)?;
        let scenarios = build_scenarios(&scaled.case, series, &clustering, scaled.load_factor)?;
        staged.push((year, scaled.case, scenarios));
    }

    let mut rows = Vec::new();
    let mut stages = Vec::new();
    for &mult in &horizon.multipliers {
        for &configuration in &options.configurations {
            let cfg = config.with_storage_multiplier(mult).with_configuration(configuration);
            let mut carry = InvestmentState::none(case);
            let mut cum = (0.0, 0.0);
            for (year, scase, scenarios) in &staged {
                let year = *year;
                let mut record = StageRecord {
                    configuration,
                    multiplier: mult,
                    year,
                    candidates: None,
                    augment_rounds_used: 0,
                    solution: None,
                    error: None,
                };

                let mut cands = CandidateSet::default();
                if configuration.allows_storage() {
                    match evaluate(scase, scenarios, &cfg, &carry) {
                        Ok(report) => {
                            cands = select_candidates(&report, options.rule);
                            info!("{configuration} x{mult} {year}: |SC| = {}", cands.len());
                            record.candidates = Some(cands.clone());
                        }
                        Err(e) => {
                            warn!("{configuration} x{mult} {year}: recourse failed: {e}");
                            rows.push(failed_row(configuration, mult, year, "error", None));
                            record.error = Some(e.to_string());
                            stages.push(record);
                            continue;
                        }
                    }
                }
                let n_cands = record.candidates.as_ref().map(|c| c.len());

                let mut outcome = solve_stage(scase, scenarios, &cfg, &cands, &carry);
                if configuration.allows_storage() {
                    for round in 0..options.augment_rounds {
                        let Ok(sol) = &outcome else { break };
                        let post = match evaluate(scase, scenarios, &cfg, &sol.investments) {
                            Ok(r) => r,
                            Err(e) => {
                                warn!("{configuration} x{mult} {year}: post-investment recourse failed: {e}");
                                break;
                            }
                        };
                        let next = augment_candidates(&cands, &post);
                        if next.bus_set() == cands.bus_set() {
                            break;
                        }
                        info!(
                            "{configuration} x{mult} {year}: augmentation round {} grows |SC| {} -> {}",
                            round + 1,
                            cands.len(),
                            next.len()
                        );
                        cands = next;
                        record.augment_rounds_used = round + 1;
                        record.candidates = Some(cands.clone());
                        outcome = solve_stage(scase, scenarios, &cfg, &cands, &carry);
                    }
                }
                let n_cands = record.candidates.as_ref().map(|c| c.len()).or(n_cands);

                match outcome {
                    Ok(sol) => {
                        cum.0 += sol.capex_lines;
                        cum.1 += sol.capex_storage;
                        let mut row = row_from(&cfg, &sol, n_cands, cum);
                        row.year = year;
                        rows.push(row);
                        carry = sol.investments.clone();
                        record.solution = Some(sol);
                    }
                    Err(StageFailure::Status(status)) => {
                        warn!("{configuration} x{mult} {year}: no solution ({})", status.as_str());
                        rows.push(failed_row(configuration, mult, year, status.as_str(), n_cands));
                        record.error = Some(format!("solver returned {}", status.as_str()));
                    }
                    Err(StageFailure::Error(e)) => {
                        warn!("{configuration} x{mult} {year}: {e}");
                        rows.push(failed_row(configuration, mult, year, "error", n_cands));
                        record.error = Some(e);
                    }
                }
                stages.push(record);
            }
        }
    }
    Ok(StudyResult {
        clustering,
        rows,
        stages,
    })
}

/// Study inputs as read from TOML. Relative paths resolve against the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyManifest {
    pub case: PathBuf,
    /// Directory holding `load.csv`, `wind.csv` and `solar.csv`.
    pub series: PathBuf,
    /// Scaling table; the built-in projections when absent.
    #[serde(default)]
    pub scaling: Option<PathBuf>,
    /// Planning config; defaults when absent.
    #[serde(default)]
    pub config: Option<PathBuf>,
    pub years: Vec<i32>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_configurations")]
    pub configurations: Vec<Configuration>,
    #[serde(default = "default_multipliers")]
    pub multipliers: Vec<f64>,
    #[serde(default)]
    pub rule: Rule,
    #[serde(default)]
    pub augment_rounds: usize,
}

fn default_k() -> usize {
    1
}

fn default_configurations() -> Vec<Configuration> {
    Configuration::ALL.to_vec()
}

fn default_multipliers() -> Vec<f64> {
    vec![1.0]
}

/// A manifest with its inputs loaded.
#[derive(Debug, Clone)]
pub struct LoadedStudy {
    pub case: GridCase,
    pub series: YearSeries,
    pub horizon: PlanningHorizon,
    pub config: PlanConfig,
    pub options: StudyOptions,
}

impl StudyManifest {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("study manifest: {e}")))
    }

    /// Reads a manifest and makes its paths absolute relative to its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m = Self::from_toml_str(&text)?;
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        m.resolve(dir);
        Ok(m)
    }

    pub fn resolve(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        fix(&mut self.case);
        fix(&mut self.series);
        if let Some(p) = self.scaling.as_mut() {
            fix(p);
        }
        if let Some(p) = self.config.as_mut() {
            fix(p);
        }
    }

    pub fn options(&self) -> StudyOptions {
        StudyOptions {
            k: self.k,
            seed: self.seed,
            rule: self.rule,
            augment_rounds: self.augment_rounds,
            configurations: self.configurations.clone(),
        }
    }

    /// Loads every referenced input and validates the horizon.
    pub fn load_inputs(&self) -> Result<LoadedStudy> {
        let case = parse_case(&self.case)?;
        let series = YearSeries::load_dir(&self.series)?;
        let table = match &self.scaling {
            Some(p) => ScalingTable::load(p)?,
            None => ScalingTable::eia_2023(),
        };
        let config = match &self.config {
            Some(p) => PlanConfig::load(p)?,
            None => PlanConfig::default(),
        };
        let horizon = PlanningHorizon::new(self.years.clone(), table, self.multipliers.clone())?;
        Ok(LoadedStudy {
            case,
            series,
            horizon,
            config,
            options: self.options(),
        })
    }
}
