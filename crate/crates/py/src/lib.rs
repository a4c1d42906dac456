//! Python bindings. Structured values cross the boundary as JSON strings.

use std::collections::BTreeSet;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use gridplan::candidates::{select_candidates, Rule};
use gridplan::grid::{scale_case, GridCase, ScalingTable};
use gridplan::milp::write_mps_string;
use gridplan::recourse::{evaluate as evaluate_rs, RecourseReport};
use gridplan::scenario::{build_scenarios, cluster_days, ScenarioSet, YearSeries};
use gridplan::tep::{
    build_model, plan as plan_rs, storage_binary_count as binary_count, Configuration,
    InvestmentState, PlanConfig,
};
use gridplan::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Solver(_) | Error::External { .. } | Error::Decode(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json<T: serde::Serialize>(v: &T) -> PyResult<String> {
    serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

fn from_json<T: serde::de::DeserializeOwned>(s: &str, what: &str) -> PyResult<T> {
    serde_json::from_str(s).map_err(|e| PyValueError::new_err(format!("{what}: {e}")))
}

struct Inputs {
    case: GridCase,
    scenarios: ScenarioSet,
    config: PlanConfig,
}

fn prepare(
    case_path: &str,
    series_dir: &str,
    k: usize,
    seed: u64,
    year: Option<i32>,
    config_path: Option<&str>,
    configuration: Option<&str>,
) -> Result<Inputs, Error> {
    let mut config = match config_path {
        Some(p) => PlanConfig::load(p)?,
        None => PlanConfig::default(),
    };
    if let Some(c) = configuration {
        config = config.with_configuration(c.parse::<Configuration>()?);
    }
    let case = gridplan::grid::parse_case(case_path)?;
    let series = YearSeries::load_dir(series_dir)?;
    let (case, factor) = match year {
        Some(y) => {
            let s = scale_case(&case, &ScalingTable::eia_2023(), y)?;
            (s.case, s.load_factor)
        }
        None => (case, 1.0),
    };
    let clustering = cluster_days(&series, k, seed)?;
    let scenarios = build_scenarios(&case, &series, &clustering, factor)?;
    Ok(Inputs {
        case,
        scenarios,
        config,
    })
}

/// Parses a MATPOWER-style case and returns it as JSON.
#[pyfunction]
fn parse_case(path: &str) -> PyResult<String> {
    json(&gridplan::grid::parse_case(path).map_err(to_py)?)
}

/// Applies the built-in year projections; returns `(case_json, load_factor)`.
#[pyfunction]
fn scale(case_json: &str, year: i32) -> PyResult<(String, f64)> {
    let case: GridCase = from_json(case_json, "case")?;
    let s = scale_case(&case, &ScalingTable::eia_2023(), year).map_err(to_py)?;
    Ok((json(&s.case)?, s.load_factor))
}

/// Clusters the days in `series_dir` and returns the clustering as JSON.
#[pyfunction]
#[pyo3(signature = (series_dir, k, seed=0))]
fn cluster(series_dir: &str, k: usize, seed: u64) -> PyResult<String> {
    let series = YearSeries::load_dir(series_dir).map_err(to_py)?;
    json(&cluster_days(&series, k, seed).map_err(to_py)?)
}

/// Solves one planning problem and returns the solution as JSON.
#[pyfunction]
#[pyo3(signature = (case_path, series_dir, k=1, seed=0, year=None, candidates=None, configuration=None, config_path=None))]
#[allow(clippy::too_many_arguments)]
fn plan(
    case_path: &str,
    series_dir: &str,
    k: usize,
    seed: u64,
    year: Option<i32>,
    candidates: Option<Vec<usize>>,
    configuration: Option<&str>,
    config_path: Option<&str>,
) -> PyResult<String> {
    let p = prepare(case_path, series_dir, k, seed, year, config_path, configuration).map_err(to_py)?;
    let set: BTreeSet<usize> = candidates.unwrap_or_default().into_iter().collect();
    json(&plan_rs(&p.case, &p.scenarios, &p.config, &set, None).map_err(to_py)?)
}

/// Recourse diagnostics with fixed investments (JSON) or none.
#[pyfunction]
#[pyo3(signature = (case_path, series_dir, k=1, seed=0, year=None, investments=None))]
fn evaluate(
    case_path: &str,
    series_dir: &str,
    k: usize,
    seed: u64,
    year: Option<i32>,
    investments: Option<&str>,
) -> PyResult<String> {
    let p = prepare(case_path, series_dir, k, seed, year, None, None).map_err(to_py)?;
    let inv = match investments {
        Some(s) => from_json::<InvestmentState>(s, "investments")?,
        None => InvestmentState::none(&p.case),
    };
    json(&evaluate_rs(&p.case, &p.scenarios, &p.config, &inv).map_err(to_py)?)
}

/// Candidate buses from a recourse report (JSON); `rule` is intersection or union.
#[pyfunction]
#[pyo3(signature = (report_json, rule="intersection"))]
fn candidates(report_json: &str, rule: &str) -> PyResult<String> {
    let report: RecourseReport = from_json(report_json, "report")?;
    let rule: Rule = rule.parse().map_err(to_py)?;
    json(&select_candidates(&report, rule))
}

/// The planning model in MPS format.
#[pyfunction]
#[pyo3(signature = (case_path, series_dir, k=1, seed=0, year=None, candidates=None))]
fn export_mps(
    case_path: &str,
    series_dir: &str,
    k: usize,
    seed: u64,
    year: Option<i32>,
    candidates: Option<Vec<usize>>,
) -> PyResult<String> {
    let p = prepare(case_path, series_dir, k, seed, year, None, None).map_err(to_py)?;
    let set: BTreeSet<usize> = candidates.unwrap_or_default().into_iter().collect();
    let tep = build_model(&p.case, &p.scenarios, &p.config, &set, None).map_err(to_py)?;
    write_mps_string(&tep.model).map_err(to_py)
}

#[pyfunction]
fn storage_binary_count(sites: usize, k: usize, hours: usize) -> usize {
    binary_count(sites, k, hours)
}

#[pymodule]
fn gridplan_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(parse_case, m)?)?;
    m.add_function(wrap_pyfunction!(scale, m)?)?;
    m.add_function(wrap_pyfunction!(cluster, m)?)?;
    m.add_function(wrap_pyfunction!(plan, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(candidates, m)?)?;
    m.add_function(wrap_pyfunction!(export_mps, m)?)?;
    m.add_function(wrap_pyfunction!(storage_binary_count, m)?)?;
    Ok(())
}
