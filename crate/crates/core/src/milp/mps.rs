//! MPS reader and writer.
//!
//! The writer lays records out on the classic fixed-format field grid and
//! prints numbers in shortest round-trip scientific notation, so reading a
//! written file reproduces every coefficient bit for bit. Names longer than
//! the fixed fields push later fields right; the reader splits on whitespace.
//!
//! Conventions: integrality is marked with `INTORG`/`INTEND` markers, binaries
//! additionally get a `BV` bound, every variable carries explicit bounds, and
//! the objective constant is written as the negated RHS of the objective row.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::model::{MilpModel, Sense, VarId, VarKind};
use crate::error::{Error, Result};

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn check_name(kind: &str, name: &str) -> Result<()> {
    if name.is_empty() || name.chars().any(char::is_whitespace) || name.starts_with('$') {
        return Err(Error::Invalid(format!(
            "{kind} name `{name}` cannot be written to MPS"
        )));
    }
    Ok(())
}

fn field_line(out: &mut String, code: &str, f2: &str, f3: &str, f4: Option<&str>) {
    // Fixed-format columns: code at 2, name at 5, name at 15, number at 25.
    let mut line = format!(" {code:<2} {f2:<8}  {f3:<8}");
    if let Some(v) = f4 {
        line.push_str("  ");
        line.push_str(v);
    }
    out.push_str(line.trim_end());
    out.push('\n');
}

pub fn write_mps_string(model: &MilpModel) -> Result<String> {
    model.validate()?;
    let mut obj_name = "OBJ".to_string();
    while model.constraints.iter().any(|c| c.name == obj_name) {
        obj_name.push('_');
    }
    for v in &model.variables {
        check_name("variable", &v.name)?;
    }
    for c in &model.constraints {
        check_name("constraint", &c.name)?;
    }
    let name = if model.name.is_empty() {
        "MODEL".to_string()
    } else {
        model.name.replace(char::is_whitespace, "_")
    };

    let mut out = String::new();
    writeln!(out, "NAME          {name}").unwrap();
    out.push_str("ROWS\n");
    field_line(&mut out, "N", &obj_name, "", None);
    for c in &model.constraints {
        let code = match c.sense {
            Sense::Le => "L",
            Sense::Ge => "G",
            Sense::Eq => "E",
        };
        field_line(&mut out, code, &c.name, "", None);
    }

    // Column-major view of the rows.
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.num_vars()];
    for (i, c) in model.constraints.iter().enumerate() {
        for &(v, a) in &c.terms {
            cols[v.0].push((i, a));
        }
    }
    out.push_str("COLUMNS\n");
    let mut in_int = false;
    let mut marker = 0usize;
    for (j, v) in model.variables.iter().enumerate() {
        let integral = v.kind.is_integral();
        if integral != in_int {
            let tag = if integral { "'INTORG'" } else { "'INTEND'" };
            writeln!(out, "    MARKER{marker:<4}          'MARKER'                 {tag}").unwrap();
            marker += 1;
            in_int = integral;
        }
        if v.cost != 0.0 || cols[j].is_empty() {
            field_line(&mut out, "", &v.name, &obj_name, Some(&num(v.cost)));
        }
        for &(i, a) in &cols[j] {
            field_line(&mut out, "", &v.name, &model.constraints[i].name, Some(&num(a)));
        }
    }
    if in_int {
        writeln!(out, "    MARKER{marker:<4}          'MARKER'                 'INTEND'").unwrap();
    }

    out.push_str("RHS\n");
    if model.objective_constant != 0.0 {
        field_line(&mut out, "", "RHS", &obj_name, Some(&num(-model.objective_constant)));
    }
    for c in &model.constraints {
        if c.rhs != 0.0 {
            field_line(&mut out, "", "RHS", &c.name, Some(&num(c.rhs)));
        }
    }

    out.push_str("BOUNDS\n");
    for v in &model.variables {
        let (lo, hi) = (v.lower, v.upper);
        if v.kind == VarKind::Binary {
            field_line(&mut out, "BV", "BND", &v.name, None);
            if lo != 0.0 {
                field_line(&mut out, "LO", "BND", &v.name, Some(&num(lo)));
            }
            if hi != 1.0 {
                field_line(&mut out, "UP", "BND", &v.name, Some(&num(hi)));
            }
            continue;
        }
        if lo == hi {
            field_line(&mut out, "FX", "BND", &v.name, Some(&num(lo)));
            continue;
        }
        match (lo.is_finite(), hi.is_finite()) {
            (false, false) => field_line(&mut out, "FR", "BND", &v.name, None),
            (false, true) => {
                field_line(&mut out, "MI", "BND", &v.name, None);
                field_line(&mut out, "UP", "BND", &v.name, Some(&num(hi)));
            }
            (true, false) => {
                field_line(&mut out, "LO", "BND", &v.name, Some(&num(lo)));
                field_line(&mut out, "PL", "BND", &v.name, None);
            }
            (true, true) => {
                field_line(&mut out, "LO", "BND", &v.name, Some(&num(lo)));
                field_line(&mut out, "UP", "BND", &v.name, Some(&num(hi)));
            }
        }
    }
    out.push_str("ENDATA\n");
    Ok(out)
}

pub fn write_mps(model: &MilpModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = write_mps_string(model)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_mps(path: impl AsRef<Path>) -> Result<MilpModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_mps_str(&text)
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
    End,
}

pub fn read_mps_str(text: &str) -> Result<MilpModel> {
    let mut model = MilpModel::new("");
    let mut section = Section::None;
    let mut obj_row: Option<String> = None;
    let mut rows: HashMap<String, usize> = HashMap::new();
    let mut cols: HashMap<String, usize> = HashMap::new();
    let mut integer_block = false;
    let mut explicit_upper: Vec<bool> = Vec::new();

    let number = |lineno: usize, tok: &str| -> Result<f64> {
        tok.parse::<f64>()
            .map_err(|_| Error::parse(lineno, format!("malformed number `{tok}`")))
    };

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with(char::is_whitespace) {
            section = match toks[0] {
                "NAME" => {
                    model.name = toks.get(1).map(|s| s.to_string()).unwrap_or_default();
                    Section::None
                }
                "OBJSENSE" => {
                    if toks.get(1).is_some_and(|s| *s == "MAX" || *s == "MAXIMIZE") {
                        return Err(Error::parse(lineno, "maximization is not supported"));
                    }
                    Section::None
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "RANGES" => Section::Ranges,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::End,
                other => {
                    return Err(Error::parse(lineno, format!("unknown section `{other}`")));
                }
            };
            continue;
        }
        match section {
            Section::None | Section::End => {
                return Err(Error::parse(lineno, "data outside of a section"));
            }
            Section::Rows => {
                if toks.len() != 2 {
                    return Err(Error::parse(lineno, "ROWS record needs a type and a name"));
                }
                let sense = match toks[0] {
                    "N" => {
                        if obj_row.is_none() {
                            obj_row = Some(toks[1].to_string());
                        }
                        continue;
                    }
                    "L" => Sense::Le,
                    "G" => Sense::Ge,
                    "E" => Sense::Eq,
                    other => {
                        return Err(Error::parse(lineno, format!("unknown row type `{other}`")))
                    }
                };
                let i = model.add_constraint(toks[1], [], sense, 0.0);
                if rows.insert(toks[1].to_string(), i).is_some() {
                    return Err(Error::parse(lineno, format!("duplicate row `{}`", toks[1])));
                }
            }
            Section::Columns => {
                if toks.len() >= 3 && toks[1] == "'MARKER'" {
                    match toks[2] {
                        "'INTORG'" => integer_block = true,
                        "'INTEND'" => integer_block = false,
                        other => {
                            return Err(Error::parse(lineno, format!("unknown marker {other}")))
                        }
                    }
                    continue;
                }
                if toks.len() != 3 && toks.len() != 5 {
                    return Err(Error::parse(lineno, "COLUMNS record needs 3 or 5 fields"));
                }
                let name = toks[0];
                let j = match cols.get(name) {
                    Some(&j) => j,
                    None => {
                        let kind = if integer_block {
                            VarKind::Integer
                        } else {
                            VarKind::Continuous
                        };
                        let v = model.add_var(name, 0.0, f64::INFINITY, kind, 0.0);
                        explicit_upper.push(false);
                        cols.insert(name.to_string(), v.0);
                        v.0
                    }
                };
                for pair in toks[1..].chunks(2) {
                    let value = number(lineno, pair[1])?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        model.variables[j].cost += value;
                    } else if let Some(&i) = rows.get(pair[0]) {
                        model.constraints[i].terms.push((VarId(j), value));
                    } else {
                        return Err(Error::parse(lineno, format!("unknown row `{}`", pair[0])));
                    }
                }
            }
            Section::Rhs => {
                if toks.len() != 3 && toks.len() != 5 {
                    return Err(Error::parse(lineno, "RHS record needs 3 or 5 fields"));
                }
                for pair in toks[1..].chunks(2) {
                    let value = number(lineno, pair[1])?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        model.objective_constant = -value;
                    } else if let Some(&i) = rows.get(pair[0]) {
                        model.constraints[i].rhs = value;
                    } else {
                        return Err(Error::parse(lineno, format!("unknown row `{}`", pair[0])));
                    }
                }
            }
            Section::Ranges => {
                return Err(Error::parse(lineno, "RANGES are not supported"));
            }
            Section::Bounds => {
                if toks.len() < 3 {
                    return Err(Error::parse(lineno, "BOUNDS record too short"));
                }
                let j = *cols
                    .get(toks[2])
                    .ok_or_else(|| Error::parse(lineno, format!("unknown column `{}`", toks[2])))?;
                let value = || -> Result<f64> {
                    toks.get(3)
                        .ok_or_else(|| Error::parse(lineno, "bound value missing"))
                        .and_then(|t| number(lineno, t))
                };
                let v = &mut model.variables[j];
                match toks[0] {
                    "LO" => v.lower = value()?,
                    "UP" => {
                        v.upper = value()?;
                        explicit_upper[j] = true;
                    }
                    "FX" => {
                        let x = value()?;
                        v.lower = x;
                        v.upper = x;
                        explicit_upper[j] = true;
                    }
                    "FR" => {
                        v.lower = f64::NEG_INFINITY;
                        v.upper = f64::INFINITY;
                        explicit_upper[j] = true;
                    }
                    "MI" => v.lower = f64::NEG_INFINITY,
                    "PL" => {
                        v.upper = f64::INFINITY;
                        explicit_upper[j] = true;
                    }
                    "BV" => {
                        v.kind = VarKind::Binary;
                        v.lower = 0.0;
                        v.upper = 1.0;
                        explicit_upper[j] = true;
                    }
                    "LI" => {
                        v.kind = VarKind::Integer;
                        v.lower = value()?;
                    }
                    "UI" => {
                        v.kind = VarKind::Integer;
                        v.upper = value()?;
                        explicit_upper[j] = true;
                    }
                    other => {
                        return Err(Error::parse(lineno, format!("unknown bound type `{other}`")))
                    }
                }
            }
        }
    }
    if section != Section::End {
        return Err(Error::parse(text.lines().count(), "missing ENDATA"));
    }
    // Integer columns without an explicit upper bound default to binary range.
    for (j, v) in model.variables.iter_mut().enumerate() {
        if v.kind == VarKind::Integer && !explicit_upper[j] && v.lower == 0.0 {
            v.upper = 1.0;
        }
    }
    // Normalize rows the same way the builder does.
    for c in &mut model.constraints {
        let terms = std::mem::take(&mut c.terms);
        let mut merged: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
        let mut sorted = terms;
        sorted.sort_by_key(|t| t.0);
        for (v, a) in sorted {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += a,
                _ => merged.push((v, a)),
            }
        }
        merged.retain(|t| t.1 != 0.0);
        c.terms = merged;
    }
    model.validate()?;
    Ok(model)
}
