//! Adapter for an external MPS-reading solver.
//!
//! Contract: `<cmd...> <model.mps> <solution.out>`. The solution file holds a
//! status line, an objective line, then one `name value` line per variable.
//! Variables missing from the file are read as zero.

use std::collections::HashMap;
use std::process::Command;

use super::model::MilpModel;
use super::mps::write_mps;
use super::{SolveResult, SolveStatus};
use crate::error::{Error, Result};

pub fn solve_external(model: &MilpModel, solver_command: &str) -> Result<SolveResult> {
    let mut parts = solver_command.split_whitespace();
    let program = parts
        .next()
        .ok_or_else(|| Error::Parameter("empty external solver command".into()))?;
    let dir = std::env::temp_dir().join(format!(
        "gridplan-ext-{}-{}",
        std::process::id(),
        unique_suffix()
    ));
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let model_path = dir.join("model.mps");
    let sol_path = dir.join("solution.out");
    let outcome = (|| {
        write_mps(model, &model_path)?;
        let output = Command::new(program)
            .args(parts)
            .arg(&model_path)
            .arg(&sol_path)
            .output()
            .map_err(|e| Error::External {
                message: format!("could not run `{program}`: {e}"),
                output: String::new(),
            })?;
        let raw = format!(
            "{}{}",
            String::from_utf8_lossy(&output.stdout),
            String::from_utf8_lossy(&output.stderr)
        );
        if !output.status.success() {
            return Err(Error::External {
                message: format!("`{solver_command}` exited with {}", output.status),
                output: raw,
            });
        }
        let text = std::fs::read_to_string(&sol_path).map_err(|e| Error::External {
            message: format!("no solution file: {e}"),
            output: raw.clone(),
        })?;
        parse_solution(model, &text).map_err(|e| Error::External {
            message: e.to_string(),
            output: format!("{raw}\n--- solution file ---\n{text}"),
        })
    })();
    let _ = std::fs::remove_dir_all(&dir);
    outcome
}

fn unique_suffix() -> u64 {
    use std::sync::atomic::{AtomicU64, Ordering};
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    COUNTER.fetch_add(1, Ordering::Relaxed)
}

/// Parses a solution file against `model`'s variable names.
pub fn parse_solution(model: &MilpModel, text: &str) -> Result<SolveResult> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (ln, status_line) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty solution file"))?;
    let status = SolveStatus::parse(status_line)
        .ok_or_else(|| Error::parse(ln, format!("unknown status `{status_line}`")))?;
    if !status.has_solution() {
        return Ok(SolveResult {
            status,
            objective: f64::NAN,
            primal: Vec::new(),
            bound: f64::NAN,
            gap: f64::INFINITY,
            nodes: 0,
            lp_iterations: 0,
        });
    }
    let (ln, obj_line) = lines
        .next()
        .ok_or_else(|| Error::parse(ln + 1, "missing objective line"))?;
    let objective: f64 = obj_line
        .parse()
        .map_err(|_| Error::parse(ln, format!("malformed objective `{obj_line}`")))?;
    let index: HashMap<&str, usize> = model
        .variables
        .iter()
        .enumerate()
        .map(|(j, v)| (v.name.as_str(), j))
        .collect();
    let mut primal = vec![0.0; model.num_vars()];
    for (ln, line) in lines {
        let mut it = line.split_whitespace();
        let (Some(name), Some(value), None) = (it.next(), it.next(), it.next()) else {
            return Err(Error::parse(ln, format!("expected `name value`, got `{line}`")));
        };
        let j = *index
            .get(name)
            .ok_or_else(|| Error::parse(ln, format!("unknown variable `{name}`")))?;
        primal[j] = value
            .parse()
            .map_err(|_| Error::parse(ln, format!("malformed value `{value}`")))?;
    }
    // The file carries no dual bound; the solver's own gap setting applies.
    Ok(SolveResult {
        status,
        objective,
        primal,
        bound: objective,
        gap: 0.0,
        nodes: 0,
        lp_iterations: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::VarKind;

    #[test]
    fn parses_solution_file() {
        let mut m = MilpModel::new("t");
        m.add_var("a", 0.0, 1.0, VarKind::Binary, -5.0);
        m.add_var("b", 0.0, 1.0, VarKind::Binary, -4.0);
        let r = parse_solution(&m, "optimal\n-5\na 1\n").unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.primal, vec![1.0, 0.0]);
        let r = parse_solution(&m, "infeasible\n").unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert!(parse_solution(&m, "optimal\n-5\nzz 1\n").is_err());
        assert!(parse_solution(&m, "weird\n").is_err());
    }

    #[test]
    fn nonzero_exit_carries_output() {
        let m = MilpModel::new("t");
        match solve_external(&m, "false") {
            Err(Error::External { message, .. }) => assert!(message.contains("exited")),
            other => panic!("{other:?}"),
        }
    }
}
