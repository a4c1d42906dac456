//! Reader for MATPOWER-style `.m` case files.
//!
//! Recognized assignments: `mpc.baseMVA`, `mpc.bus`, `mpc.branch`, `mpc.gen`,
//! `mpc.gencost` (required matrices), plus the optional `mpc.bus_name` and
//! `mpc.genfuel` cell arrays, `mpc.bus_geo` (`bus lat lon` rows) and
//! `mpc.branch_length` (km, one row per branch row). Everything else is skipped.

use std::collections::HashMap;
use std::path::Path;

use log::warn;

use super::{haversine_km, Branch, Bus, Generator, GeneratorKind, GridCase, DEFAULT_BASE_MVA};
use crate::error::{Error, Result};

// MATPOWER column indices.
const BUS_I: usize = 0;
const BUS_PD: usize = 2;
const BUS_AREA: usize = 6;
const F_BUS: usize = 0;
const T_BUS: usize = 1;
const BR_X: usize = 3;
const RATE_A: usize = 5;
const BR_STATUS: usize = 10;
const ANGMIN: usize = 11;
const ANGMAX: usize = 12;
const GEN_BUS: usize = 0;
const GEN_STATUS: usize = 7;
const PMAX: usize = 8;
const PMIN: usize = 9;

#[derive(Debug)]
struct Matrix {
    line: usize,
    rows: Vec<(usize, Vec<f64>)>,
}

#[derive(Debug)]
enum Value {
    Scalar(usize, String),
    Matrix(Matrix),
    Cell(usize, Vec<String>),
}

pub fn parse_case(path: impl AsRef<Path>) -> Result<GridCase> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_case_str(&text)
}

pub fn parse_case_str(text: &str) -> Result<GridCase> {
    let values = tokenize(text)?;
    build_case(&values)
}

fn strip_comment(line: &str) -> &str {
    let mut quote: Option<char> = None;
    for (i, c) in line.char_indices() {
        match (quote, c) {
            (None, '%') => return &line[..i],
            (None, '\'') | (None, '"') => quote = Some(c),
            (Some(q), c) if c == q => quote = None,
            _ => {}
        }
    }
    line
}

fn tokenize(text: &str) -> Result<HashMap<String, Value>> {
    let mut values = HashMap::new();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, strip_comment(l)));
    while let Some((lineno, line)) = lines.next() {
        let trimmed = line.trim();
        let Some(rest) = trimmed.strip_prefix("mpc.") else {
            continue;
        };
        let Some(eq) = rest.find('=') else {
            return Err(Error::parse(lineno, format!("expected assignment, found `{trimmed}`")));
        };
        let name = rest[..eq].trim().to_string();
        let rhs = rest[eq + 1..].trim();
        let value = if let Some(body) = rhs.strip_prefix('[') {
            Value::Matrix(read_matrix(lineno, body, &mut lines)?)
        } else if let Some(body) = rhs.strip_prefix('{') {
            read_cell(lineno, body, &mut lines)?
        } else {
            let v = rhs.trim_end_matches(';').trim().to_string();
            Value::Scalar(lineno, v)
        };
        values.insert(name, value);
    }
    Ok(values)
}

fn read_matrix<'a>(
    start: usize,
    first: &'a str,
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
) -> Result<Matrix> {
    let mut rows = Vec::new();
    let mut current: Vec<f64> = Vec::new();
    let mut chunk = (start, first);
    loop {
        let (lineno, text) = chunk;
        let (body, closed) = match text.find(']') {
            Some(p) => (&text[..p], true),
            None => (text, false),
        };
        for (k, piece) in body.split(';').enumerate() {
            if k > 0 && !current.is_empty() {
                rows.push((lineno, std::mem::take(&mut current)));
            }
            for tok in piece.split(|c: char| c.is_whitespace() || c == ',') {
                if tok.is_empty() || tok == "..." {
                    continue;
                }
                current.push(parse_number(tok).ok_or_else(|| {
                    Error::parse(lineno, format!("malformed number `{tok}`"))
                })?);
            }
        }
        // A newline ends a row as well.
        if !current.is_empty() {
            rows.push((lineno, std::mem::take(&mut current)));
        }
        if closed {
            return Ok(Matrix { line: start, rows });
        }
        chunk = lines
            .next()
            .ok_or_else(|| Error::parse(start, "unterminated matrix (missing `]`)"))?;
    }
}

fn read_cell<'a>(
    start: usize,
    first: &'a str,
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
) -> Result<Value> {
    let mut items = Vec::new();
    let mut chunk = (start, first);
    loop {
        let (lineno, text) = chunk;
        let mut chars = text.char_indices().peekable();
        let mut closed = false;
        while let Some((_, c)) = chars.next() {
            match c {
                '\'' | '"' => {
                    let mut s = String::new();
                    let mut terminated = false;
                    for (_, d) in chars.by_ref() {
                        if d == c {
                            terminated = true;
                            break;
                        }
                        s.push(d);
                    }
                    if !terminated {
                        return Err(Error::parse(lineno, "unterminated string in cell array"));
                    }
                    items.push(s);
                }
                '}' => {
                    closed = true;
                    break;
                }
                c if c.is_whitespace() || c == ';' || c == ',' => {}
                other => {
                    return Err(Error::parse(
                        lineno,
                        format!("unexpected `{other}` in cell array"),
                    ))
                }
            }
        }
        if closed {
            return Ok(Value::Cell(start, items));
        }
        chunk = lines
            .next()
            .ok_or_else(|| Error::parse(start, "unterminated cell array (missing `}`)"))?;
    }
}

fn parse_number(tok: &str) -> Option<f64> {
    match tok {
        "Inf" | "inf" => Some(f64::INFINITY),
        "-Inf" | "-inf" => Some(f64::NEG_INFINITY),
        _ => tok.parse().ok(),
    }
}

fn matrix<'a>(values: &'a HashMap<String, Value>, name: &str) -> Result<Option<&'a Matrix>> {
    match values.get(name) {
        None => Ok(None),
        Some(Value::Matrix(m)) => Ok(Some(m)),
        Some(Value::Scalar(line, _)) | Some(Value::Cell(line, _)) => {
            Err(Error::parse(*line, format!("mpc.{name} must be a matrix")))
        }
    }
}

fn required<'a>(values: &'a HashMap<String, Value>, name: &str) -> Result<&'a Matrix> {
    matrix(values, name)?
        .ok_or_else(|| Error::parse(0, format!("missing required section mpc.{name}")))
}

fn cell<'a>(values: &'a HashMap<String, Value>, name: &str) -> Result<Option<&'a [String]>> {
    match values.get(name) {
        None => Ok(None),
        Some(Value::Cell(_, items)) => Ok(Some(items)),
        Some(Value::Scalar(line, _)) | Some(Value::Matrix(Matrix { line, .. })) => {
            Err(Error::parse(*line, format!("mpc.{name} must be a cell array")))
        }
    }
}

fn col(row: &(usize, Vec<f64>), idx: usize, section: &str) -> Result<f64> {
    row.1.get(idx).copied().ok_or_else(|| {
        Error::parse(
            row.0,
            format!("{section} row has {} columns, need at least {}", row.1.len(), idx + 1),
        )
    })
}

fn build_case(values: &HashMap<String, Value>) -> Result<GridCase> {
    let base_mva = match values.get("baseMVA") {
        None => DEFAULT_BASE_MVA,
        Some(Value::Scalar(line, v)) => v
            .parse::<f64>()
            .ok()
            .filter(|b| *b > 0.0)
            .ok_or_else(|| Error::parse(*line, format!("invalid baseMVA `{v}`")))?,
        Some(Value::Matrix(m)) => return Err(Error::parse(m.line, "baseMVA must be a scalar")),
        Some(Value::Cell(line, _)) => return Err(Error::parse(*line, "baseMVA must be a scalar")),
    };
    let bus_m = required(values, "bus")?;
    let branch_m = required(values, "branch")?;
    let gen_m = required(values, "gen")?;
    let cost_m = required(values, "gencost")?;
    let names = cell(values, "bus_name")?;
    let fuels = cell(values, "genfuel")?;

    let mut geo: HashMap<i64, (f64, f64)> = HashMap::new();
    let has_geo = if let Some(g) = matrix(values, "bus_geo")? {
        for row in &g.rows {
            let id = col(row, 0, "bus_geo")? as i64;
            let lat = col(row, 1, "bus_geo")?;
            let lon = col(row, 2, "bus_geo")?;
            if !lat.is_finite() || !lon.is_finite() {
                return Err(Error::parse(row.0, "non-finite coordinates"));
            }
            geo.insert(id, (lat, lon));
        }
        true
    } else {
        false
    };

    let mut buses = Vec::with_capacity(bus_m.rows.len());
    let mut index: HashMap<i64, usize> = HashMap::new();
    for (k, row) in bus_m.rows.iter().enumerate() {
        let id = col(row, BUS_I, "bus")? as i64;
        if index.insert(id, buses.len()).is_some() {
            return Err(Error::parse(row.0, format!("duplicate bus id {id}")));
        }
        let (latitude, longitude) = match geo.get(&id) {
            Some(&c) => c,
            None if has_geo => {
                return Err(Error::parse(row.0, format!("bus {id} missing from mpc.bus_geo")))
            }
            None => (0.0, 0.0),
        };
        let name = names
            .and_then(|n| n.get(k))
            .map(|s| s.trim().to_string())
            .unwrap_or_else(|| format!("bus{id}"));
        let area = row.1.get(BUS_AREA).map(|a| format!("{a}"));
        buses.push(Bus {
            id,
            name,
            latitude,
            longitude,
            area,
            load: col(row, BUS_PD, "bus")? / base_mva,
        });
    }
    if !has_geo {
        warn!("case has no mpc.bus_geo section; coordinates default to (0, 0)");
    }

    let lengths = match matrix(values, "branch_length")? {
        Some(m) => {
            if m.rows.len() != branch_m.rows.len() {
                return Err(Error::parse(
                    m.line,
                    format!(
                        "mpc.branch_length has {} rows but mpc.branch has {}",
                        m.rows.len(),
                        branch_m.rows.len()
                    ),
                ));
            }
            Some(
                m.rows
                    .iter()
                    .map(|r| col(r, 0, "branch_length"))
                    .collect::<Result<Vec<_>>>()?,
            )
        }
        None => None,
    };

    let lookup = |row: &(usize, Vec<f64>), c: usize, section: &str| -> Result<usize> {
        let id = col(row, c, section)? as i64;
        index
            .get(&id)
            .copied()
            .ok_or_else(|| Error::parse(row.0, format!("{section} references unknown bus {id}")))
    };

    let mut branches = Vec::new();
    for (k, row) in branch_m.rows.iter().enumerate() {
        let status = row.1.get(BR_STATUS).copied().unwrap_or(1.0);
        if status == 0.0 {
            continue;
        }
        let from_bus = lookup(row, F_BUS, "branch")?;
        let to_bus = lookup(row, T_BUS, "branch")?;
        if from_bus == to_bus {
            return Err(Error::parse(row.0, "branch connects a bus to itself"));
        }
        let reactance = col(row, BR_X, "branch")?;
        if !(reactance > 0.0) {
            return Err(Error::parse(
                row.0,
                format!("branch reactance must be positive, got {reactance}"),
            ));
        }
        let rate = col(row, RATE_A, "branch")?;
        if rate < 0.0 {
            return Err(Error::parse(row.0, format!("negative rateA {rate}")));
        }
        let thermal_limit = if rate == 0.0 {
            f64::INFINITY
        } else {
            rate / base_mva
        };
        let (angle_min, angle_max) = angle_limits(row)?;
        let length_km = match &lengths {
            Some(l) => l[k],
            None => {
                let (a, b) = (&buses[from_bus], &buses[to_bus]);
                haversine_km(a.latitude, a.longitude, b.latitude, b.longitude)
            }
        };
        branches.push(Branch {
            id: k as i64 + 1,
            from_bus,
            to_bus,
            reactance,
            thermal_limit,
            length_km,
            angle_min,
            angle_max,
        });
    }

    if cost_m.rows.len() < gen_m.rows.len() {
        return Err(Error::parse(
            cost_m.line,
            format!(
                "mpc.gencost has {} rows but mpc.gen has {}",
                cost_m.rows.len(),
                gen_m.rows.len()
            ),
        ));
    }
    if let Some(f) = fuels {
        if f.len() != gen_m.rows.len() {
            warn!(
                "mpc.genfuel has {} entries for {} generators; unmatched units default to `other`",
                f.len(),
                gen_m.rows.len()
            );
        }
    }
    let mut generators = Vec::new();
    for (k, row) in gen_m.rows.iter().enumerate() {
        let status = row.1.get(GEN_STATUS).copied().unwrap_or(1.0);
        if status <= 0.0 {
            continue;
        }
        let bus = lookup(row, GEN_BUS, "gen")?;
        let kind = fuels
            .and_then(|f| f.get(k))
            .map(|l| GeneratorKind::from_fuel(l))
            .unwrap_or(GeneratorKind::Other);
        let p_max = col(row, PMAX, "gen")? / base_mva;
        let mut p_min = (col(row, PMIN, "gen")? / base_mva).max(0.0);
        if kind.is_renewable() && p_min != 0.0 {
            warn!("generator {} ({kind}) had Pmin > 0; set to 0", k + 1);
            p_min = 0.0;
        }
        if !(p_min <= p_max) || !p_max.is_finite() {
            return Err(Error::parse(
                row.0,
                format!("generator limits Pmin={p_min} Pmax={p_max} are invalid"),
            ));
        }
        let (cost_linear, cost_fixed) = linear_cost(&cost_m.rows[k])?;
        generators.push(Generator {
            id: k as i64 + 1,
            bus,
            kind,
            p_min,
            p_max,
            cost_linear,
            cost_fixed,
        });
    }

    let case = GridCase {
        base_mva,
        buses,
        branches,
        generators,
    };
    case.validate()?;
    case.ensure_connected()?;
    Ok(case)
}

fn angle_limits(row: &(usize, Vec<f64>)) -> Result<(f64, f64)> {
    let lo = row.1.get(ANGMIN).copied().unwrap_or(-360.0);
    let hi = row.1.get(ANGMAX).copied().unwrap_or(360.0);
    // MATPOWER treats 0/0 and ±360° as unconstrained.
    if lo == 0.0 && hi == 0.0 {
        return Ok((f64::NEG_INFINITY, f64::INFINITY));
    }
    let lo = if lo <= -360.0 { f64::NEG_INFINITY } else { lo.to_radians() };
    let hi = if hi >= 360.0 { f64::INFINITY } else { hi.to_radians() };
    if !(lo <= 0.0 && hi >= 0.0) {
        return Err(Error::parse(
            row.0,
            "branch angle limits must satisfy angmin <= 0 <= angmax",
        ));
    }
    Ok((lo, hi))
}

/// Reduces a gencost row to `(c1, c0)`: $/MWh slope and $/h constant.
fn linear_cost(row: &(usize, Vec<f64>)) -> Result<(f64, f64)> {
    let model = col(row, 0, "gencost")?;
    let n = col(row, 3, "gencost")? as usize;
    let coeffs = row.1.get(4..4 + if model == 1.0 { 2 * n } else { n }).ok_or_else(|| {
        Error::parse(row.0, format!("gencost row too short for {n} coefficients"))
    })?;
    if model == 2.0 {
        // c(n-1) ... c1 c0
        let c0 = if n >= 1 { coeffs[n - 1] } else { 0.0 };
        let c1 = if n >= 2 { coeffs[n - 2] } else { 0.0 };
        Ok((c1, c0))
    } else if model == 1.0 {
        // piecewise linear points (p1, f1) ... (pn, fn): use the chord.
        if n < 2 {
            return Err(Error::parse(row.0, "piecewise gencost needs at least two points"));
        }
        let (p0, f0) = (coeffs[0], coeffs[1]);
        let (p1, f1) = (coeffs[2 * n - 2], coeffs[2 * n - 1]);
        if p1 == p0 {
            return Ok((0.0, f0));
        }
        let c1 = (f1 - f0) / (p1 - p0);
        Ok((c1, f0 - c1 * p0))
    } else {
        Err(Error::parse(row.0, format!("unknown gencost model {model}")))
    }
}
